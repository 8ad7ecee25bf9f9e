//! Exact inner maximization over one-hot discrete codes:
//!
//! ```text
//! max_labels  Σ_i U[i, label_i]  -  λ' · Σ_{i≠j} 1(label_i = label_j)
//! ```
//!
//! [`solve_mcf`] is the production solver (min-cost flow with convex sink
//! costs); [`solve_bruteforce`] enumerates every labeling and serves as its
//! oracle on small instances.

mod bruteforce;
mod mcf;
mod text;

pub use bruteforce::{solve_bruteforce, BRUTEFORCE_LIMIT};
pub use mcf::{solve_mcf, solve_mcf_with_network, FlowNetwork};
pub use text::{format_assignment, parse_instance};

use crate::{Error, Matrix, Result};

/// Reward matrix `U` (`n × S`) and collision penalty weight `λ'`.
#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentInstance {
    utilities: Matrix,
    lambda_prime: f64,
}

impl AssignmentInstance {
    pub fn new(utilities: Matrix, lambda_prime: f64) -> Result<Self> {
        if utilities.rows() == 0 || utilities.cols() == 0 {
            return Err(Error::Invalid(format!(
                "assignment instance needs n >= 1 and S >= 1, got {}x{}",
                utilities.rows(),
                utilities.cols()
            )));
        }
        if utilities.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("assignment rewards must be finite".into()));
        }
        if !(lambda_prime >= 0.0 && lambda_prime.is_finite()) {
            return Err(Error::Invalid(format!(
                "lambda_prime must be finite and non-negative, got {lambda_prime}"
            )));
        }
        Ok(AssignmentInstance {
            utilities,
            lambda_prime,
        })
    }

    pub fn utilities(&self) -> &Matrix {
        &self.utilities
    }

    pub fn lambda_prime(&self) -> f64 {
        self.lambda_prime
    }

    pub fn n(&self) -> usize {
        self.utilities.rows()
    }

    pub fn categories(&self) -> usize {
        self.utilities.cols()
    }

    /// Objective of a labeling in the maximization convention.
    pub fn objective(&self, labels: &[usize]) -> Result<f64> {
        if labels.len() != self.n() {
            return Err(Error::shape("objective", self.n(), labels.len()));
        }
        let pairs = collision_count(labels, self.categories())?;
        let reward: f64 = labels
            .iter()
            .enumerate()
            .map(|(i, &k)| self.utilities.get(i, k))
            .sum();
        Ok(reward - self.lambda_prime * pairs as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub labels: Vec<usize>,
    pub objective: f64,
}

/// Ordered pairs `i ≠ j` sharing a label: `Σ_k n_k (n_k - 1)`.
pub fn collision_count(labels: &[usize], categories: usize) -> Result<u64> {
    let mut counts = vec![0u64; categories];
    for &l in labels {
        *counts
            .get_mut(l)
            .ok_or_else(|| Error::Invalid(format!("label {l} out of range for S={categories}")))? += 1;
    }
    Ok(counts.iter().map(|&c| c * c.saturating_sub(1)).sum())
}

/// Row-wise argmax, lowest index on ties.
pub fn per_sample_argmax(utilities: &Matrix) -> Vec<usize> {
    utilities
        .iter_rows()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Converts labels to one-hot rows.
pub fn one_hot(labels: &[usize], categories: usize) -> Matrix {
    let mut m = Matrix::zeros(labels.len(), categories);
    for (i, &l) in labels.iter().enumerate() {
        m.set(i, l, 1.0);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collision_count_examples() {
        assert_eq!(collision_count(&[2, 2, 2], 3).unwrap(), 6);
        assert_eq!(collision_count(&[0, 1, 2], 3).unwrap(), 0);
        assert_eq!(collision_count(&[0, 0, 1, 1], 2).unwrap(), 4);
        assert!(collision_count(&[0, 3], 3).is_err());
    }

    #[test]
    fn argmax_examples() {
        let u = Matrix::from_rows(&[[0.2, 1.0, -3.0], [5.0, 5.0, 5.0]]).unwrap();
        assert_eq!(per_sample_argmax(&u), vec![1, 0]);
    }

    #[test]
    fn instance_validation() {
        assert!(AssignmentInstance::new(Matrix::zeros(0, 2), 0.0).is_err());
        assert!(AssignmentInstance::new(Matrix::zeros(2, 0), 0.0).is_err());
        assert!(AssignmentInstance::new(Matrix::zeros(2, 2), -1.0).is_err());
        assert!(AssignmentInstance::new(Matrix::zeros(2, 2), f64::NAN).is_err());
    }

    #[test]
    fn one_hot_rows() {
        let m = one_hot(&[1, 0], 3);
        assert_eq!(m.as_slice(), &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
    }
}

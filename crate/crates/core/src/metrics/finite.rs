//! Exact information quantities on small discrete joint distributions.

use crate::{Error, Result};

/// Probability table over variables with small finite alphabets, stored in
/// mixed-radix row-major order (last variable fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteJoint {
    sizes: Vec<usize>,
    probs: Vec<f64>,
}

impl FiniteJoint {
    pub fn new(sizes: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        let cells: usize = sizes.iter().product();
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::Invalid("alphabet sizes must be positive".into()));
        }
        if probs.len() != cells {
            return Err(Error::shape("FiniteJoint::new", cells, probs.len()));
        }
        if probs.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::Invalid("probabilities must be finite and non-negative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!("probabilities sum to {total}, not 1")));
        }
        Ok(FiniteJoint { sizes, probs })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(sizes: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Invalid("weights must have positive mass".into()));
        }
        Self::new(sizes, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_vars(&self) -> usize {
        self.sizes.len()
    }

    fn decode(&self, mut cell: usize, out: &mut [usize]) {
        for (slot, &s) in out.iter_mut().zip(&self.sizes).rev() {
            *slot = cell % s;
            cell /= s;
        }
    }

    fn check_vars(&self, vars: &[usize]) -> Result<()> {
        for (i, &v) in vars.iter().enumerate() {
            if v >= self.sizes.len() {
                return Err(Error::Invalid(format!("variable {v} out of range")));
            }
            if vars[..i].contains(&v) {
                return Err(Error::Invalid(format!("variable {v} listed twice")));
            }
        }
        Ok(())
    }

    /// Marginal over `vars`, in the order given.
    pub fn marginal(&self, vars: &[usize]) -> Result<FiniteJoint> {
        self.check_vars(vars)?;
        if vars.is_empty() {
            return Err(Error::Invalid("marginal over no variables".into()));
        }
        let sizes: Vec<usize> = vars.iter().map(|&v| self.sizes[v]).collect();
        let mut probs = vec![0.0; sizes.iter().product()];
        let mut idx = vec![0; self.sizes.len()];
        for (cell, &p) in self.probs.iter().enumerate() {
            self.decode(cell, &mut idx);
            let target = vars.iter().fold(0, |acc, &v| acc * self.sizes[v] + idx[v]);
            probs[target] += p;
        }
        // Marginal sums can drift from 1 by a few ulps; no renormalization.
        Ok(FiniteJoint { sizes, probs })
    }
}

/// `-Σ p ln p` in nats over every cell, with `0 ln 0 = 0`.
pub fn entropy(dist: &FiniteJoint) -> f64 {
    -dist
        .probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// `KL(p ‖ Π_g p_g)` where each group `g` is a set of positions within
/// `joint`'s variables.
fn kl_to_product(joint: &FiniteJoint, groups: &[Vec<usize>]) -> Result<f64> {
    let marginals = groups
        .iter()
        .map(|g| joint.marginal(g))
        .collect::<Result<Vec<_>>>()?;
    let mut idx = vec![0; joint.num_vars()];
    let mut total = 0.0;
    for (cell, &p) in joint.probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        joint.decode(cell, &mut idx);
        let q: f64 = groups
            .iter()
            .zip(&marginals)
            .map(|(g, m)| {
                let pos = g.iter().fold(0, |acc, &v| acc * joint.sizes[v] + idx[v]);
                m.probs[pos]
            })
            .product();
        total += p * (p / q).ln();
    }
    Ok(total)
}

/// Exact `I(A; B)` between two disjoint variable groups.
pub fn mutual_information(joint: &FiniteJoint, group_a: &[usize], group_b: &[usize]) -> Result<f64> {
    if group_a.is_empty() || group_b.is_empty() {
        return Err(Error::Invalid("mutual information needs two non-empty groups".into()));
    }
    if let Some(v) = group_a.iter().find(|v| group_b.contains(v)) {
        return Err(Error::Invalid(format!("variable {v} appears in both groups")));
    }
    let mut union: Vec<usize> = group_a.iter().chain(group_b).copied().collect();
    union.sort_unstable();
    let sub = joint.marginal(&union)?;
    let position = |v: &usize| union.iter().position(|u| u == v).expect("in union");
    let ga: Vec<usize> = group_a.iter().map(position).collect();
    let gb: Vec<usize> = group_b.iter().map(position).collect();
    kl_to_product(&sub, &[ga, gb])
}

/// Exact total correlation `KL(p(z) ‖ Π_j p(z_j))` over `vars`.
pub fn total_correlation_exact(joint: &FiniteJoint, vars: &[usize]) -> Result<f64> {
    if vars.len() < 2 {
        return Err(Error::Invalid("total correlation needs at least two variables".into()));
    }
    let mut sorted = vars.to_vec();
    sorted.sort_unstable();
    let sub = joint.marginal(&sorted)?;
    let singletons: Vec<Vec<usize>> = (0..sorted.len()).map(|i| vec![i]).collect();
    kl_to_product(&sub, &singletons)
}

/// `KL(p ‖ q)` between two distributions on the same table.
pub fn kl_divergence(p: &FiniteJoint, q: &FiniteJoint) -> Result<f64> {
    if p.sizes != q.sizes {
        return Err(Error::Invalid("KL between tables of different shapes".into()));
    }
    let mut total = 0.0;
    for (&a, &b) in p.probs.iter().zip(&q.probs) {
        if a > 0.0 {
            if b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            total += a * (a / b).ln();
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_bits(p: [f64; 4]) -> FiniteJoint {
        FiniteJoint::new(vec![2, 2], p.to_vec()).unwrap()
    }

    #[test]
    fn entropy_values() {
        let uniform = FiniteJoint::new(vec![4], vec![0.25; 4]).unwrap();
        assert!((entropy(&uniform) - 1.386294).abs() < 1e-6);
        let point = FiniteJoint::new(vec![3], vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(entropy(&point), 0.0);
        let skew = FiniteJoint::new(vec![3], vec![0.5, 0.25, 0.25]).unwrap();
        assert!((entropy(&skew) - 1.039721).abs() < 1e-6);
        assert!((entropy(&skew) - 1.5 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(FiniteJoint::new(vec![2], vec![0.5, 0.4]).is_err());
        assert!(FiniteJoint::new(vec![2], vec![1.5, -0.5]).is_err());
        assert!(FiniteJoint::new(vec![2, 2], vec![0.5, 0.5]).is_err());
        assert!(FiniteJoint::new(vec![0], vec![]).is_err());
    }

    #[test]
    fn mutual_information_values() {
        let indep = two_bits([0.06, 0.14, 0.24, 0.56]);
        assert!(mutual_information(&indep, &[0], &[1]).unwrap().abs() < 1e-12);
        let copy = two_bits([0.5, 0.0, 0.0, 0.5]);
        assert!((mutual_information(&copy, &[0], &[1]).unwrap() - 0.693147).abs() < 1e-6);
        let mixed = two_bits([0.1, 0.2, 0.3, 0.4]);
        assert_eq!(
            mutual_information(&mixed, &[0], &[1]).unwrap(),
            mutual_information(&mixed, &[1], &[0]).unwrap()
        );
        assert!(mutual_information(&mixed, &[0], &[0]).is_err());
    }

    #[test]
    fn total_correlation_values() {
        let indep = two_bits([0.06, 0.14, 0.24, 0.56]);
        assert!(total_correlation_exact(&indep, &[0, 1]).unwrap().abs() < 1e-12);
        let mut probs = vec![0.0; 8];
        probs[0] = 0.5;
        probs[7] = 0.5;
        let triple = FiniteJoint::new(vec![2, 2, 2], probs).unwrap();
        assert!((total_correlation_exact(&triple, &[0, 1, 2]).unwrap() - 1.386294).abs() < 1e-6);
        let mixed = two_bits([0.1, 0.2, 0.3, 0.4]);
        assert_eq!(
            total_correlation_exact(&mixed, &[0, 1]).unwrap(),
            mutual_information(&mixed, &[0], &[1]).unwrap()
        );
        assert!(total_correlation_exact(&mixed, &[0]).is_err());
    }

    #[test]
    fn marginal_order() {
        let j = FiniteJoint::new(vec![2, 3], vec![0.1, 0.2, 0.3, 0.05, 0.15, 0.2]).unwrap();
        let m = j.marginal(&[1]).unwrap();
        assert!((m.probs()[0] - 0.15).abs() < 1e-15);
        let swapped = j.marginal(&[1, 0]).unwrap();
        assert_eq!(swapped.sizes(), &[3, 2]);
        assert_eq!(swapped.probs()[1], 0.05);
    }
}

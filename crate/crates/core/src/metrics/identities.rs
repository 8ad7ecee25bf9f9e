//! Executable checks of the information identities behind the cascade and the
//! collision penalty, evaluated exactly on random finite models.

use super::finite::{kl_divergence, mutual_information, total_correlation_exact, FiniteJoint};
use crate::{Prng, Result};

/// Largest absolute residual of each identity over all trials.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IdentityReport {
    pub trials: usize,
    /// `TC(z_{1:i}) - TC(z_{1:i-1}) - I(z_{1:i-1}; z_i)`.
    pub chain_step: f64,
    /// `I(x; [z1, z2]) - I(x; z1) - I(x; z2) + I(z1; z2)` under `q(z|x) = Π q(z_j|x)`.
    pub partition: f64,
    /// `TC(z) - Σ_{i≥2} I(z_{1:i-1}; z_i)`.
    pub telescoping: f64,
    /// `E_x KL(q(z|x) ‖ p(z)) - I(x; z) - TC(z) - Σ_j KL(q(z_j) ‖ p(z_j))`.
    pub kl_decomposition: f64,
    /// `max(0, KL(q(d) ‖ uniform) - (S Σ q(d)² - 1))`.
    pub collision_bound_violation: f64,
}

impl IdentityReport {
    /// Largest residual among the equalities (the bound is reported separately).
    pub fn max_residual(&self) -> f64 {
        self.chain_step
            .max(self.partition)
            .max(self.telescoping)
            .max(self.kl_decomposition)
    }
}

fn random_weights(rng: &mut Prng, n: usize) -> Vec<f64> {
    // Cubing spreads the mass so some cells are nearly empty.
    (0..n).map(|_| rng.uniform().powi(3) + 1e-12).collect()
}

fn random_sizes(rng: &mut Prng, count: usize) -> Vec<usize> {
    (0..count).map(|_| 2 + rng.below(3)).collect()
}

fn tc_prefix(joint: &FiniteJoint, len: usize) -> Result<f64> {
    if len < 2 {
        return Ok(0.0);
    }
    total_correlation_exact(joint, &(0..len).collect::<Vec<_>>())
}

fn chain_checks(joint: &FiniteJoint) -> Result<(f64, f64)> {
    let nv = joint.num_vars();
    let mut chain: f64 = 0.0;
    let mut sum_mi = 0.0;
    for i in 2..=nv {
        let prefix: Vec<usize> = (0..i - 1).collect();
        let mi = mutual_information(joint, &prefix, &[i - 1])?;
        let step = tc_prefix(joint, i)? - tc_prefix(joint, i - 1)? - mi;
        chain = chain.max(step.abs());
        sum_mi += mi;
    }
    let telescoping = (tc_prefix(joint, nv)? - sum_mi).abs();
    Ok((chain, telescoping))
}

/// Joint over `(x, z_1, …, z_k)` with `p(z|x) = Π_j p(z_j|x)`, plus the
/// conditional tables it was built from.
struct ConditionalModel {
    joint: FiniteJoint,
    p_x: Vec<f64>,
    /// `cond[j][x][v] = q(z_j = v | x)`.
    cond: Vec<Vec<Vec<f64>>>,
}

fn normalized(w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

fn conditional_model(rng: &mut Prng) -> Result<ConditionalModel> {
    let nx = 2 + rng.below(3);
    let k = 2 + rng.below(2);
    let z_sizes = random_sizes(rng, k);
    let p_x = normalized(random_weights(rng, nx));
    let cond: Vec<Vec<Vec<f64>>> = z_sizes
        .iter()
        .map(|&s| (0..nx).map(|_| normalized(random_weights(rng, s))).collect())
        .collect();

    let mut sizes = vec![nx];
    sizes.extend(&z_sizes);
    let cells: usize = sizes.iter().product();
    let mut probs = vec![0.0; cells];
    let mut idx = vec![0; sizes.len()];
    for (cell, p) in probs.iter_mut().enumerate() {
        let mut rest = cell;
        for (slot, &s) in idx.iter_mut().zip(&sizes).rev() {
            *slot = rest % s;
            rest /= s;
        }
        let x = idx[0];
        *p = p_x[x] * (0..k).map(|j| cond[j][x][idx[j + 1]]).product::<f64>();
    }
    Ok(ConditionalModel {
        joint: FiniteJoint::from_weights(sizes, probs)?,
        p_x,
        cond,
    })
}

fn partition_check(model: &ConditionalModel) -> Result<f64> {
    let nv = model.joint.num_vars();
    let z2: Vec<usize> = (2..nv).collect();
    let zs: Vec<usize> = (1..nv).collect();
    let j = &model.joint;
    let lhs = mutual_information(j, &[0], &zs)?;
    let rhs = mutual_information(j, &[0], &[1])? + mutual_information(j, &[0], &z2)? - mutual_information(j, &[1], &z2)?;
    Ok((lhs - rhs).abs())
}

fn kl_decomposition_check(model: &ConditionalModel, rng: &mut Prng) -> Result<f64> {
    let j = &model.joint;
    let k = model.cond.len();
    let z_sizes = &j.sizes()[1..];
    let priors: Vec<Vec<f64>> = z_sizes.iter().map(|&s| normalized(random_weights(rng, s))).collect();

    // E_x KL(q(z|x) ‖ p(z)) with both sides factorized over dimensions:
    // Σ_x p(x) Σ_j KL(q(z_j|x) ‖ p(z_j)), evaluated per dimension.
    let mut expected_kl = 0.0;
    for (x, &px) in model.p_x.iter().enumerate() {
        let mut kl_x = 0.0;
        for d in 0..k {
            for (&q, &p) in model.cond[d][x].iter().zip(&priors[d]) {
                if q > 0.0 {
                    kl_x += q * (q / p).ln();
                }
            }
        }
        expected_kl += px * kl_x;
    }

    let zs: Vec<usize> = (1..=k).collect();
    let mi = mutual_information(j, &[0], &zs)?;
    let tc = total_correlation_exact(j, &zs)?;
    let mut marginal_kl = 0.0;
    for d in 0..k {
        let q = j.marginal(&[d + 1])?;
        let p = FiniteJoint::from_weights(vec![z_sizes[d]], priors[d].clone())?;
        marginal_kl += kl_divergence(&q, &p)?;
    }
    Ok((expected_kl - mi - tc - marginal_kl).abs())
}

/// `max(0, KL(q ‖ uniform) - (S Σ q² - 1))` for a distribution over `S` values.
pub fn collision_bound_violation(q: &[f64]) -> f64 {
    let s = q.len() as f64;
    let kl: f64 = q.iter().filter(|&&p| p > 0.0).map(|&p| p * (p * s).ln()).sum();
    let bound = s * q.iter().map(|p| p * p).sum::<f64>() - 1.0;
    (kl - bound).max(0.0)
}

/// Runs every identity on `trials` random models and reports the worst residuals.
pub fn verify_identities(rng: &mut Prng, trials: usize) -> Result<IdentityReport> {
    let mut report = IdentityReport {
        trials,
        ..IdentityReport::default()
    };
    for trial in 0..trials {
        let nv = 3 + rng.below(2);
        let sizes = random_sizes(rng, nv);
        let cells = sizes.iter().product();
        let joint = FiniteJoint::from_weights(sizes, random_weights(rng, cells))?;
        let (chain, telescoping) = chain_checks(&joint)?;
        report.chain_step = report.chain_step.max(chain);
        report.telescoping = report.telescoping.max(telescoping);

        let model = conditional_model(rng)?;
        report.partition = report.partition.max(partition_check(&model)?);
        report.kl_decomposition = report.kl_decomposition.max(kl_decomposition_check(&model, rng)?);

        let s = 2 + rng.below(5);
        let mut q = random_weights(rng, s);
        if trial % 3 == 0 {
            // push toward a point mass
            q.iter_mut().for_each(|v| *v = v.powi(8));
        }
        let q = normalized(q);
        report.collision_bound_violation = report.collision_bound_violation.max(collision_bound_violation(&q));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residuals_vanish() {
        let report = verify_identities(&mut Prng::new(17), 50).unwrap();
        assert!(report.max_residual() < 1e-9, "{report:?}");
        assert!(report.collision_bound_violation <= 1e-12);
        assert_eq!(report.trials, 50);
    }

    #[test]
    fn collision_bound_at_uniform_and_point_mass() {
        assert_eq!(collision_bound_violation(&[1.0 / 3.0; 3]), 0.0);
        let q = [1.0, 0.0, 0.0];
        let kl: f64 = 3f64.ln();
        assert!((kl - 1.0986).abs() < 1e-4);
        // bound = 3·1 - 1 = 2 ≥ ln 3
        assert_eq!(collision_bound_violation(&q), 0.0);
    }

    #[test]
    fn chain_detects_broken_identity() {
        // Sanity check that the residual machinery is not vacuous: a
        // mismatched pairing of TC and MI leaves a visible gap.
        let joint = FiniteJoint::from_weights(vec![2, 2, 2], (1..=8).map(|v| (v * v) as f64).collect()).unwrap();
        let tc = total_correlation_exact(&joint, &[0, 1, 2]).unwrap();
        let wrong = mutual_information(&joint, &[0], &[1]).unwrap();
        assert!((tc - wrong).abs() > 1e-4);
    }
}

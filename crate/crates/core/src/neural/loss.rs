use super::matrix::Matrix;
use super::mlp::{encode, forward_backward, init_params, standard_normal, Architecture, MlpParams};
use crate::{Error, Prng, Result};

/// Batch-averaged terms of the negated objective.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub recon_nll: f64,
    pub kl_weighted: f64,
    pub collision: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(recon_nll: f64, kl_weighted: f64, collision: f64) -> Self {
        LossBreakdown {
            recon_nll,
            kl_weighted,
            collision,
            total: recon_nll + kl_weighted + collision,
        }
    }
}

/// `λ' · Σ_{i≠j} d_iᵀ d_j / n`. All-zero rows contribute nothing.
pub fn collision_term(d_onehot: &Matrix, lambda_prime: f64) -> f64 {
    let n = d_onehot.rows();
    if n == 0 {
        return 0.0;
    }
    let s = d_onehot.cols();
    let mut col_sum = vec![0.0; s];
    let mut diag = 0.0;
    for row in d_onehot.iter_rows() {
        for (c, &v) in col_sum.iter_mut().zip(row) {
            *c += v;
            diag += v * v;
        }
    }
    let pairs: f64 = col_sum.iter().map(|c| c * c).sum::<f64>() - diag;
    lambda_prime * pairs / n as f64
}

pub(crate) fn breakdown(loglik: &[f64], kl: &Matrix, betas: &[f64], collision: f64) -> LossBreakdown {
    let n = loglik.len();
    if n == 0 {
        return LossBreakdown::new(0.0, 0.0, collision);
    }
    let recon = -loglik.iter().sum::<f64>() / n as f64;
    let kl_weighted = kl
        .iter_rows()
        .map(|row| row.iter().zip(betas).map(|(k, b)| b * k).sum::<f64>())
        .sum::<f64>()
        / n as f64;
    LossBreakdown::new(recon, kl_weighted, collision)
}

/// Loss and gradients for a fixed reparameterization noise `eps`.
pub fn loss_and_grads_with_noise(
    params: &MlpParams,
    batch: &Matrix,
    d_onehot: &Matrix,
    betas: &[f64],
    lambda_prime: f64,
    eps: &Matrix,
) -> Result<(LossBreakdown, MlpParams)> {
    if betas.iter().any(|&b| !(b >= 0.0)) {
        return Err(Error::Invalid("betas must be non-negative".into()));
    }
    let enc = encode(params, batch)?;
    let fb = forward_backward(params, &enc, batch, d_onehot, betas, eps)?;
    let loss = breakdown(&fb.loglik, &fb.kl, betas, collision_term(d_onehot, lambda_prime));
    Ok((loss, fb.grads))
}

/// Loss of the block-coordinate step with `d` fixed, and exact gradients of
/// `recon_nll + kl_weighted` through one reparameterized sample per row.
///
/// The collision term is reported but, being constant in the parameters once
/// `d` is fixed, contributes nothing to the gradient.
pub fn loss_and_grads(
    params: &MlpParams,
    batch: &Matrix,
    d_onehot: &Matrix,
    betas: &[f64],
    lambda_prime: f64,
    rng: &mut Prng,
) -> Result<(LossBreakdown, MlpParams)> {
    let eps = standard_normal(batch.rows(), params.latent_dim(), rng);
    loss_and_grads_with_noise(params, batch, d_onehot, betas, lambda_prime, &eps)
}

/// Maximum relative error `|a - b| / max(1, |a|, |b|)` between analytic
/// gradients and central differences with step `h`, over every parameter.
///
/// The reparameterization noise is drawn once from a fixed stream so both
/// routes see the same objective.
pub fn finite_diff_check(
    params: &MlpParams,
    batch: &Matrix,
    d_onehot: &Matrix,
    betas: &[f64],
    lambda_prime: f64,
    h: f64,
) -> Result<f64> {
    let eps = standard_normal(
        batch.rows(),
        params.latent_dim(),
        &mut Prng::new(0).derive("gradcheck"),
    );
    let (_, analytic) = loss_and_grads_with_noise(params, batch, d_onehot, betas, lambda_prime, &eps)?;
    let objective = |p: &MlpParams| -> Result<f64> {
        loss_and_grads_with_noise(p, batch, d_onehot, betas, lambda_prime, &eps).map(|(l, _)| l.total)
    };

    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    let n_arrays = params.arrays().len();
    for a in 0..n_arrays {
        let len = params.arrays()[a].as_slice().len();
        for k in 0..len {
            let orig = params.arrays()[a].as_slice()[k];
            probe.arrays_mut()[a].as_mut_slice()[k] = orig + h;
            let up = objective(&probe)?;
            probe.arrays_mut()[a].as_mut_slice()[k] = orig - h;
            let down = objective(&probe)?;
            probe.arrays_mut()[a].as_mut_slice()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let exact = analytic.arrays()[a].as_slice()[k];
            let rel = (exact - numeric).abs() / 1f64.max(exact.abs()).max(numeric.abs());
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

/// [`finite_diff_check`] over `networks` random small networks (random
/// widths, depths, codes, betas and non-zero biases); returns the worst error.
pub fn random_gradient_check(rng: &mut Prng, networks: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for net in 0..networks {
        let image_dim = 4 + rng.below(9);
        let hidden: Vec<usize> = (0..1 + rng.below(2)).map(|_| 3 + rng.below(6)).collect();
        let (m, s) = (1 + rng.below(4), 1 + rng.below(4));
        let arch = Architecture::mlp(image_dim, &hidden, m, s);
        let mut params = init_params(&arch, m, s, &rng.derive_indexed("net", net as u64))?;
        let names = params.array_names();
        for (name, arr) in names.iter().zip(params.arrays_mut()) {
            if name.ends_with("bias") {
                arr.as_mut_slice().iter_mut().for_each(|b| *b = rng.uniform_range(-0.2, 0.2));
            }
        }
        let n = 2 + rng.below(5);
        let pixels = (0..n * image_dim).map(|_| if rng.uniform() < 0.4 { 1.0 } else { 0.0 }).collect();
        let batch = Matrix::from_vec(n, image_dim, pixels)?;
        let mut d = Matrix::zeros(n, s);
        if net % 4 != 0 {
            for i in 0..n {
                d.set(i, rng.below(s), 1.0);
            }
        }
        let betas: Vec<f64> = (0..m).map(|_| rng.uniform_range(0.0, 5.0)).collect();
        let lambda_prime = rng.uniform();
        worst = worst.max(finite_diff_check(&params, &batch, &d, &betas, lambda_prime, 1e-5)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{init_params, Architecture};

    fn setup(seed: u64) -> (MlpParams, Matrix, Matrix) {
        let rng = Prng::new(seed);
        let mut params = init_params(&Architecture::mlp(8, &[6, 5], 3, 2), 3, 2, &rng).unwrap();
        // Zero biases put every unit of an all-zero image exactly on the ReLU kink.
        let mut jitter = rng.derive("bias");
        let names = params.array_names();
        for (name, arr) in names.iter().zip(params.arrays_mut()) {
            if name.ends_with("bias") {
                arr.as_mut_slice().iter_mut().for_each(|b| *b = jitter.uniform_range(-0.1, 0.1));
            }
        }
        let mut data = rng.derive("data");
        let batch = Matrix::from_vec(
            4,
            8,
            (0..32).map(|_| if data.uniform() < 0.4 { 1.0 } else { 0.0 }).collect(),
        )
        .unwrap();
        let d = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).unwrap();
        (params, batch, d)
    }

    #[test]
    fn collision_counts_ordered_pairs() {
        let d = Matrix::from_rows(&[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).unwrap();
        // category 0 has 3 members -> 6 ordered pairs; / n = 4.
        assert_eq!(collision_term(&d, 0.5), 0.5 * 6.0 / 4.0);
        assert_eq!(collision_term(&Matrix::zeros(4, 2), 1.0), 0.0);
    }

    #[test]
    fn collision_has_no_gradient() {
        let (params, batch, d) = setup(1);
        let betas = [2.0, 1.0, 0.5];
        let eps = standard_normal(4, 3, &mut Prng::new(9));
        let (l0, g0) = loss_and_grads_with_noise(&params, &batch, &d, &betas, 0.0, &eps).unwrap();
        let (l1, g1) = loss_and_grads_with_noise(&params, &batch, &d, &betas, 3.0, &eps).unwrap();
        assert_eq!(g0, g1);
        assert_eq!(l0.recon_nll, l1.recon_nll);
        assert!(l1.collision > 0.0);
        assert_eq!(l1.total, l1.recon_nll + l1.kl_weighted + l1.collision);
    }

    #[test]
    fn zero_beta_drops_dimension() {
        let (params, batch, d) = setup(2);
        let eps = standard_normal(4, 3, &mut Prng::new(3));
        let (full, _) = loss_and_grads_with_noise(&params, &batch, &d, &[1.0, 1.0, 1.0], 0.0, &eps).unwrap();
        let (drop, _) = loss_and_grads_with_noise(&params, &batch, &d, &[1.0, 0.0, 1.0], 0.0, &eps).unwrap();
        let kl = crate::neural::gaussian_kl_per_dim(&crate::neural::encoder_forward(&params, &batch).unwrap());
        let dim1: f64 = (0..4).map(|i| kl.get(i, 1)).sum::<f64>() / 4.0;
        assert!((full.kl_weighted - drop.kl_weighted - dim1).abs() < 1e-12);
    }

    #[test]
    fn negative_beta_rejected() {
        let (params, batch, d) = setup(3);
        let mut rng = Prng::new(0);
        assert!(loss_and_grads(&params, &batch, &d, &[1.0, -1.0, 1.0], 0.0, &mut rng).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..5 {
            let (params, batch, d) = setup(seed);
            let err = finite_diff_check(&params, &batch, &d, &[3.0, 1.0, 0.0], 0.1, 1e-5).unwrap();
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn random_networks_pass() {
        let err = random_gradient_check(&mut Prng::new(21), 6).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn warmup_codes_gradients_match_finite_differences() {
        let (params, batch, _) = setup(7);
        let err = finite_diff_check(&params, &batch, &Matrix::zeros(4, 2), &[1.0; 3], 0.0, 1e-5).unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn finite_difference_step_halving_is_stable() {
        let (params, batch, d) = setup(11);
        let coarse = finite_diff_check(&params, &batch, &d, &[1.0; 3], 0.0, 1e-5).unwrap();
        let fine = finite_diff_check(&params, &batch, &d, &[1.0; 3], 0.0, 5e-6).unwrap();
        assert!(fine <= 10.0 * coarse.max(1e-12), "{coarse} -> {fine}");
    }

    #[test]
    fn empty_batch_is_zero_loss() {
        let (params, _, _) = setup(4);
        let mut rng = Prng::new(0);
        let (loss, grads) =
            loss_and_grads(&params, &Matrix::zeros(0, 8), &Matrix::zeros(0, 2), &[1.0; 3], 1.0, &mut rng).unwrap();
        assert_eq!(loss, LossBreakdown::default());
        assert_eq!(grads, params.zeros_like());
    }
}

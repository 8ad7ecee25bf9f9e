//! Sample-based diagnostics: Gaussian-fit total correlation and per-dimension
//! mutual information between image and latent.

use super::disentangle::infer_representation;
use crate::data::Dataset;
use crate::neural::{encoder_forward, standard_normal, MlpParams};
use crate::{Error, Matrix, Prng, Result};

/// Ridge added to the correlation matrix before factorizing.
pub const TC_RIDGE: f64 = 1e-6;

/// Total correlation of a Gaussian fitted to the rows of `z`:
/// `0.5 (Σ_j ln Σ_jj - ln det Σ)`, computed on the correlation matrix so the
/// value is unchanged by per-dimension affine rescaling. An approximation:
/// the aggregate posterior is not Gaussian in general.
pub fn estimate_tc_gaussian(z: &Matrix) -> Result<f64> {
    let (n, m) = z.shape();
    if n <= m {
        return Err(Error::Metric(format!("Gaussian TC needs more rows than dims ({n} <= {m})")));
    }
    let mut mean = vec![0.0; m];
    for row in z.iter_rows() {
        mean.iter_mut().zip(row).for_each(|(a, v)| *a += v);
    }
    mean.iter_mut().for_each(|a| *a /= n as f64);
    let mut cov = vec![0.0; m * m];
    for row in z.iter_rows() {
        for a in 0..m {
            let da = row[a] - mean[a];
            for b in 0..=a {
                cov[a * m + b] += da * (row[b] - mean[b]);
            }
        }
    }
    let sd: Vec<f64> = (0..m).map(|a| cov[a * m + a].sqrt()).collect();
    let mut corr = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..=a {
            let c = if a == b {
                1.0
            } else if sd[a] > 0.0 && sd[b] > 0.0 {
                cov[a * m + b] / (sd[a] * sd[b])
            } else {
                0.0
            };
            corr[a * m + b] = c;
            corr[b * m + a] = c;
        }
        corr[a * m + a] += TC_RIDGE;
    }
    let log_det = cholesky_log_det(&mut corr, m)?;
    Ok(0.5 * (m as f64 * (1.0 + TC_RIDGE).ln() - log_det))
}

/// In-place lower Cholesky; returns `ln det`.
fn cholesky_log_det(a: &mut [f64], m: usize) -> Result<f64> {
    let mut log_det = 0.0;
    for j in 0..m {
        let mut d = a[j * m + j];
        for k in 0..j {
            d -= a[j * m + k] * a[j * m + k];
        }
        if !(d > 0.0) {
            return Err(Error::Metric("covariance is not positive definite".into()));
        }
        let l = d.sqrt();
        a[j * m + j] = l;
        log_det += 2.0 * l.ln();
        for i in j + 1..m {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= a[i * m + k] * a[j * m + k];
            }
            a[i * m + j] = s / l;
        }
    }
    Ok(log_det)
}

fn log_normal(x: f64, mu: f64, log_var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI).ln() + log_var + (x - mu) * (x - mu) * (-log_var).exp())
}

/// Per-dimension `I(x; z_j)` for one batch of posteriors: mean over `i` of
/// `ln q(z_j^i | x^i) - ln (1/n) Σ_k q(z_j^i | x^k)`.
fn batch_mixture_mi(mu: &Matrix, log_var: &Matrix, z: &Matrix) -> Vec<f64> {
    let (n, m) = mu.shape();
    let mut out = vec![0.0; m];
    let mut terms = vec![0.0; n];
    for j in 0..m {
        for i in 0..n {
            let zi = z.get(i, j);
            for (k, t) in terms.iter_mut().enumerate() {
                *t = log_normal(zi, mu.get(k, j), log_var.get(k, j));
            }
            let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
            out[j] += terms[i] - (lse - (n as f64).ln());
        }
        out[j] /= n as f64;
    }
    out
}

/// Entropy in nats of the empirical label distribution.
pub fn label_entropy(labels: &[usize], card: usize) -> f64 {
    let mut counts = vec![0usize; card.max(1)];
    for &l in labels {
        counts[l] += 1;
    }
    let n = labels.len() as f64;
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// `m` continuous estimates followed by the discrete one. The continuous
/// estimates average the minibatch-mixture estimator over one shuffled pass
/// of the data in batches of `batch` rows (a trailing batch smaller than 2 is
/// dropped). The discrete estimate is `H(d)` of the inferred labels, since `d`
/// is a deterministic function of `x`.
pub fn estimate_mi_per_dim(params: &MlpParams, dataset: &Dataset, batch: usize, rng: &mut Prng) -> Result<Vec<f64>> {
    if batch < 2 {
        return Err(Error::Metric("MI estimation needs batches of at least 2".into()));
    }
    let m = params.latent_dim();
    let order = rng.permutation(dataset.len());
    let mut sums = vec![0.0; m];
    let mut batches = 0usize;
    for rows in order.chunks(batch).filter(|c| c.len() >= 2) {
        let post = encoder_forward(params, &dataset.images_matrix(rows))?;
        let eps = standard_normal(rows.len(), m, rng);
        let mut z = post.mu.clone();
        for ((zv, &lv), &e) in z.as_mut_slice().iter_mut().zip(post.log_var.as_slice()).zip(eps.as_slice()) {
            *zv += (0.5 * lv).exp() * e;
        }
        for (s, v) in sums.iter_mut().zip(batch_mixture_mi(&post.mu, &post.log_var, &z)) {
            *s += v;
        }
        batches += 1;
    }
    if batches == 0 {
        return Err(Error::Metric("dataset too small for one MI batch".into()));
    }
    let mut out: Vec<f64> = sums.into_iter().map(|s| s / batches as f64).collect();
    let rep = infer_representation(params, dataset)?;
    out.push(label_entropy(&rep.discrete, rep.discrete_card));
    Ok(out)
}

//! Vote-based disentanglement score over factor-conditioned samples.

use crate::assignment::per_sample_argmax;
use crate::data::Dataset;
use crate::neural::{encoder_forward, gaussian_kl_per_dim, MlpParams};
use crate::trainer::likelihood_matrix;
use crate::{Error, Matrix, Prng, Result};

/// Continuous dims whose dataset-mean KL falls below this are pruned.
pub const PRUNE_THRESHOLD: f64 = 0.1;

const CHUNK: usize = 256;

/// Deterministic latent representation of every dataset row.
#[derive(Clone, Debug, PartialEq)]
pub struct Representation {
    /// `n × m` posterior means.
    pub continuous: Matrix,
    /// Inferred discrete label per row, in `[0, S)`.
    pub discrete: Vec<usize>,
    pub discrete_card: usize,
}

impl Representation {
    pub fn len(&self) -> usize {
        self.discrete.len()
    }

    pub fn is_empty(&self) -> bool {
        self.discrete.is_empty()
    }

    /// Index used for the discrete dimension in [`DisentanglementReport::surviving_dims`].
    pub fn discrete_index(&self) -> usize {
        self.continuous.cols()
    }

    /// A discrete code with a single value carries nothing and is left out.
    pub fn has_discrete(&self) -> bool {
        self.discrete_card >= 2
    }
}

fn chunks(len: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..len).step_by(CHUNK).map(move |s| (s..(s + CHUNK).min(len)).collect())
}

/// Posterior means plus the per-sample argmax of the decoder likelihood at
/// those means (no collision penalty at inference).
pub fn infer_representation(params: &MlpParams, dataset: &Dataset) -> Result<Representation> {
    let m = params.latent_dim();
    let mut continuous = Matrix::zeros(dataset.len(), m);
    let mut discrete = Vec::with_capacity(dataset.len());
    for rows in chunks(dataset.len()) {
        let images = dataset.images_matrix(&rows);
        let post = encoder_forward(params, &images)?;
        for (i, &r) in rows.iter().enumerate() {
            continuous.row_mut(r).copy_from_slice(post.mu.row(i));
        }
        discrete.extend(per_sample_argmax(&likelihood_matrix(params, &post.mu, &images)?));
    }
    Ok(Representation {
        continuous,
        discrete,
        discrete_card: params.discrete_card(),
    })
}

/// Dataset mean of the per-dimension KL to the standard normal prior.
pub fn mean_kl_per_dim(params: &MlpParams, dataset: &Dataset) -> Result<Vec<f64>> {
    let mut sums = vec![0.0; params.latent_dim()];
    for rows in chunks(dataset.len()) {
        let post = encoder_forward(params, &dataset.images_matrix(&rows))?;
        for row in gaussian_kl_per_dim(&post).iter_rows() {
            sums.iter_mut().zip(row).for_each(|(s, v)| *s += v);
        }
    }
    let n = dataset.len().max(1) as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

/// Indices whose mean KL is at least [`PRUNE_THRESHOLD`].
pub fn surviving_from_kl(mean_kl: &[f64]) -> Vec<usize> {
    (0..mean_kl.len()).filter(|&j| mean_kl[j] >= PRUNE_THRESHOLD).collect()
}

/// Continuous dims that survive pruning. Errors when nothing would be left
/// to score (every continuous dim pruned and no usable discrete code).
pub fn prune_dims(params: &MlpParams, dataset: &Dataset) -> Result<Vec<usize>> {
    let kept = surviving_from_kl(&mean_kl_per_dim(params, dataset)?);
    if kept.is_empty() && params.discrete_card() < 2 {
        return Err(Error::Metric(
            "every continuous dimension was pruned and there is no discrete dimension".into(),
        ));
    }
    Ok(kept)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisentanglementReport {
    pub score: f64,
    /// `vote_matrix[i][k]`: votes of `surviving_dims[i]` for factor `k`.
    pub vote_matrix: Vec<Vec<u64>>,
    /// Continuous dim indices, then `m` for the discrete dim when it takes part.
    pub surviving_dims: Vec<usize>,
    /// Full-data variance of each surviving dim.
    pub full_data_variances: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Unbiased variance, which equals the pairwise form `Σ_{p,q} (a_p - a_q)² / (2L(L-1))`.
fn pairwise_variance_continuous(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (count, sum) = values.clone().fold((0usize, 0.0), |(c, s), v| (c + 1, s + v));
    if count < 2 {
        return 0.0;
    }
    let mean = sum / count as f64;
    values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1) as f64
}

/// `Σ_{p,q} 𝟙(a_p ≠ a_q) / (2L(L-1)) = (L² - Σ_k c_k²) / (2L(L-1))`.
fn pairwise_variance_discrete(labels: impl Iterator<Item = usize>, card: usize) -> f64 {
    let mut counts = vec![0u64; card];
    let mut total = 0u64;
    for l in labels {
        counts[l] += 1;
        total += 1;
    }
    if total < 2 {
        return 0.0;
    }
    let same: u64 = counts.iter().map(|c| c * c).sum();
    let l = total as f64;
    (l * l - same as f64) / (2.0 * l * (l - 1.0))
}

fn dim_variance(rep: &Representation, dim: usize, rows: &[usize]) -> f64 {
    if dim == rep.discrete_index() {
        pairwise_variance_discrete(rows.iter().map(|&r| rep.discrete[r]), rep.discrete_card)
    } else {
        pairwise_variance_continuous(rows.iter().map(|&r| rep.continuous.get(r, dim)))
    }
}

/// Scores `rep` over `continuous_dims` (plus the discrete dim when it has
/// at least two values). Each of `votes` rounds fixes one factor at a random
/// value, draws `samples` rows, and votes for the dim with the smallest
/// variance relative to its full-data variance.
pub fn score_representation(
    rep: &Representation,
    dataset: &Dataset,
    continuous_dims: &[usize],
    samples: usize,
    votes: usize,
    rng: &mut Prng,
) -> Result<DisentanglementReport> {
    if rep.len() != dataset.len() {
        return Err(Error::shape("score_representation", dataset.len(), rep.len()));
    }
    if samples < 2 || votes == 0 {
        return Err(Error::Metric("need at least 2 samples per vote and at least one vote".into()));
    }
    if let Some(f) = dataset.factors().iter().find(|f| f.cardinality < 2) {
        return Err(Error::Metric(format!("factor {} has a single value", f.name)));
    }
    if let Some(&j) = continuous_dims.iter().find(|&&j| j >= rep.continuous.cols()) {
        return Err(Error::Metric(format!("dimension {j} out of range")));
    }
    if rep.discrete.iter().any(|&l| l >= rep.discrete_card) {
        return Err(Error::Metric("discrete label out of range".into()));
    }

    let mut candidates: Vec<usize> = continuous_dims.to_vec();
    if rep.has_discrete() {
        candidates.push(rep.discrete_index());
    }
    let all_rows: Vec<usize> = (0..rep.len()).collect();
    let mut warnings = Vec::new();
    let mut surviving_dims = Vec::new();
    let mut full_data_variances = Vec::new();
    for &dim in &candidates {
        let v = dim_variance(rep, dim, &all_rows);
        if v > 0.0 {
            surviving_dims.push(dim);
            full_data_variances.push(v);
        } else {
            warnings.push(format!("dimension {dim} is constant over the data and was excluded"));
        }
    }
    if surviving_dims.is_empty() {
        return Err(Error::Metric("no dimension left to score".into()));
    }

    let k_count = dataset.factors().len();
    let mut vote_matrix = vec![vec![0u64; k_count]; surviving_dims.len()];
    for _ in 0..votes {
        let k = rng.below(k_count);
        let value = rng.below(dataset.factors()[k].cardinality);
        let rows = dataset.fixed_factor_rows(k, value, samples, rng)?;
        let mut best = (0, f64::INFINITY);
        for (i, (&dim, &v)) in surviving_dims.iter().zip(&full_data_variances).enumerate() {
            let ratio = dim_variance(rep, dim, &rows) / v;
            if ratio < best.1 {
                best = (i, ratio);
            }
        }
        vote_matrix[best.0][k] += 1;
    }
    let majority: u64 = vote_matrix.iter().map(|row| *row.iter().max().expect("K >= 1")).sum();
    Ok(DisentanglementReport {
        score: majority as f64 / votes as f64,
        vote_matrix,
        surviving_dims,
        full_data_variances,
        warnings,
    })
}

/// Infers, prunes and scores in one go.
pub fn disentanglement_score(
    params: &MlpParams,
    dataset: &Dataset,
    samples: usize,
    votes: usize,
    rng: &mut Prng,
) -> Result<DisentanglementReport> {
    let dims = prune_dims(params, dataset)?;
    let rep = infer_representation(params, dataset)?;
    score_representation(&rep, dataset, &dims, samples, votes, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_dataset, FactorSpec};

    fn oracle(ds: &Dataset) -> Representation {
        let mut continuous = Matrix::zeros(ds.len(), 3);
        for r in 0..ds.len() {
            for k in 1..4 {
                continuous.set(r, k - 1, ds.factor_row(r)[k] as f64);
            }
        }
        Representation {
            continuous,
            discrete: ds.factor_column(0),
            discrete_card: 3,
        }
    }

    #[test]
    fn pairwise_forms() {
        let vals = [1.0, 4.0, 4.0, 7.0];
        let mut brute = 0.0;
        for a in vals {
            for b in vals {
                brute += (a - b) * (a - b);
            }
        }
        brute /= 2.0 * 4.0 * 3.0;
        assert!((pairwise_variance_continuous(vals.iter().copied()) - brute).abs() < 1e-12);
        // labels 0,0,1,2: 10 unequal ordered pairs of 16
        let d = pairwise_variance_discrete([0, 0, 1, 2].into_iter(), 3);
        assert!((d - 10.0 / 24.0).abs() < 1e-15);
        assert_eq!(pairwise_variance_discrete([2, 2, 2].into_iter(), 3), 0.0);
    }

    #[test]
    fn oracle_scores_one() {
        let ds = generate_dataset(&FactorSpec::default()).unwrap();
        let rep = oracle(&ds);
        let report = score_representation(&rep, &ds, &[0, 1, 2], 100, 800, &mut Prng::new(1)).unwrap();
        assert_eq!(report.score, 1.0);
        assert_eq!(report.surviving_dims, vec![0, 1, 2, 3]);
        let total: u64 = report.vote_matrix.iter().flatten().sum();
        assert_eq!(total, 800);
        // discrete dim votes only for shape
        assert_eq!(report.vote_matrix[3][1..], [0, 0, 0]);
    }

    #[test]
    fn planted_dimension_tracks_its_factor() {
        let ds = generate_dataset(&FactorSpec::default()).unwrap();
        let mut noise = Prng::new(5);
        let mut continuous = Matrix::zeros(ds.len(), 3);
        for r in 0..ds.len() {
            continuous.set(r, 0, ds.factor_row(r)[2] as f64);
            continuous.set(r, 1, noise.uniform());
            continuous.set(r, 2, noise.uniform());
        }
        let rep = Representation {
            continuous,
            discrete: vec![0; ds.len()],
            discrete_card: 1,
        };
        let report = score_representation(&rep, &ds, &[0, 1, 2], 100, 400, &mut Prng::new(2)).unwrap();
        let row = &report.vote_matrix[0];
        let best = (0..4).max_by_key(|&k| row[k]).unwrap();
        assert_eq!(best, 2);
        assert!(report.score >= 0.0 && report.score <= 1.0);
    }

    #[test]
    fn constant_dim_excluded_with_warning() {
        let ds = generate_dataset(&FactorSpec::default()).unwrap();
        let mut rep = oracle(&ds);
        for r in 0..ds.len() {
            rep.continuous.set(r, 1, 3.0);
        }
        let report = score_representation(&rep, &ds, &[0, 1, 2], 50, 100, &mut Prng::new(1)).unwrap();
        assert_eq!(report.surviving_dims, vec![0, 2, 3]);
        assert_eq!(report.warnings.len(), 1);
    }

    #[test]
    fn deterministic_given_seed() {
        let ds = generate_dataset(&FactorSpec::default()).unwrap();
        let rep = oracle(&ds);
        let a = score_representation(&rep, &ds, &[0, 2], 30, 50, &mut Prng::new(8)).unwrap();
        let b = score_representation(&rep, &ds, &[0, 2], 30, 50, &mut Prng::new(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn prune_threshold_is_inclusive() {
        assert_eq!(surviving_from_kl(&[0.0, 0.1, 0.0999, 2.0]), vec![1, 3]);
    }

    #[test]
    fn inference_matches_unpenalized_solver() {
        use crate::assignment::{solve_mcf, AssignmentInstance};
        use crate::neural::{init_params, Architecture};
        let ds = generate_dataset(&FactorSpec {
            width: 8,
            ..FactorSpec::default()
        })
        .unwrap();
        let params = init_params(&Architecture::mlp(64, &[16], 3, 3), 3, 3, &Prng::new(4)).unwrap();
        let rep = infer_representation(&params, &ds).unwrap();
        assert_eq!(rep, infer_representation(&params, &ds).unwrap());
        let rows: Vec<usize> = (0..20).collect();
        let images = ds.images_matrix(&rows);
        let mu = encoder_forward(&params, &images).unwrap().mu;
        let u = likelihood_matrix(&params, &mu, &images).unwrap();
        let solved = solve_mcf(&AssignmentInstance::new(u, 0.0).unwrap()).unwrap();
        assert_eq!(solved.labels, rep.discrete[..20]);
    }
}

//! Evaluation: the vote-based disentanglement score, cluster accuracy, TC and
//! MI diagnostics, and exact checks of the underlying information identities.

mod cluster;
mod disentangle;
mod estimators;
mod finite;
mod identities;
mod report;

pub use cluster::cluster_accuracy;
pub use disentangle::{
    disentanglement_score, infer_representation, mean_kl_per_dim, prune_dims, score_representation,
    surviving_from_kl, DisentanglementReport, Representation, PRUNE_THRESHOLD,
};
pub use estimators::{estimate_mi_per_dim, estimate_tc_gaussian, label_entropy, TC_RIDGE};
pub use finite::{entropy, kl_divergence, mutual_information, total_correlation_exact, FiniteJoint};
pub use identities::{collision_bound_violation, verify_identities, IdentityReport};
pub use report::{vote_csv, EvalReport};

use crate::data::Dataset;
use crate::neural::MlpParams;
use crate::{Prng, Result};

/// Runs the full evaluation. Factor 0 of the dataset is the class used for
/// cluster accuracy. Sub-streams of `rng` drive the votes and the MI batches.
pub fn evaluate(
    params: &MlpParams,
    dataset: &Dataset,
    samples: usize,
    votes: usize,
    mi_batch: usize,
    rng: &Prng,
) -> Result<EvalReport> {
    let dims = prune_dims(params, dataset)?;
    let rep = infer_representation(params, dataset)?;
    let disentanglement = score_representation(&rep, dataset, &dims, samples, votes, &mut rng.derive("votes"))?;
    Ok(EvalReport {
        disentanglement,
        cluster_accuracy: cluster_accuracy(&rep.discrete, &dataset.factor_column(0))?,
        tc_gaussian: estimate_tc_gaussian(&rep.continuous)?,
        mi: estimate_mi_per_dim(params, dataset, mi_batch, &mut rng.derive("mi"))?,
    })
}

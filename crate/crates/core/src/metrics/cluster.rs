use std::collections::BTreeMap;

use crate::{Error, Result};

/// Accuracy after mapping each inferred label to its most frequent true class.
/// Ties between classes go to the smaller class label.
pub fn cluster_accuracy(inferred: &[usize], truth: &[usize]) -> Result<f64> {
    if inferred.len() != truth.len() {
        return Err(Error::shape("cluster_accuracy", truth.len(), inferred.len()));
    }
    if inferred.is_empty() {
        return Err(Error::Metric("cluster accuracy of an empty set".into()));
    }
    let mut table: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for (&c, &t) in inferred.iter().zip(truth) {
        *table.entry(c).or_default().entry(t).or_default() += 1;
    }
    let correct: usize = table
        .values()
        .map(|classes| classes.values().copied().max().unwrap_or(0))
        .sum();
    Ok(correct as f64 / inferred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Prng;

    #[test]
    fn permutation_invariant() {
        let truth: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let perm = [2, 0, 1];
        let inferred: Vec<usize> = truth.iter().map(|&t| perm[t]).collect();
        assert_eq!(cluster_accuracy(&inferred, &truth).unwrap(), 1.0);
    }

    #[test]
    fn single_cluster_gets_majority_share() {
        let truth: Vec<usize> = (0..100).map(|i| i % 10).collect();
        assert!((cluster_accuracy(&vec![0; 100], &truth).unwrap() - 0.10).abs() < 1e-15);
    }

    #[test]
    fn random_labels_at_least_chance() {
        let truth: Vec<usize> = (0..900).map(|i| i % 3).collect();
        let mut rng = Prng::new(3);
        let inferred: Vec<usize> = (0..900).map(|_| rng.below(3)).collect();
        assert!(cluster_accuracy(&inferred, &truth).unwrap() >= 1.0 / 3.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(cluster_accuracy(&[0, 1], &[0]).is_err());
    }
}

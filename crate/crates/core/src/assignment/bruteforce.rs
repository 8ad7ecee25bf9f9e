use super::{Assignment, AssignmentInstance};
use crate::{Error, Result};

/// Largest `S^n` the exhaustive solver accepts.
pub const BRUTEFORCE_LIMIT: u64 = 1_000_000;

/// Exhaustive search. Labelings are visited in lexicographic order and only a
/// strict improvement replaces the incumbent, so ties resolve to the
/// lexicographically smallest label vector.
pub fn solve_bruteforce(inst: &AssignmentInstance) -> Result<Assignment> {
    let (n, s) = (inst.n(), inst.categories());
    let total = (s as u64)
        .checked_pow(n as u32)
        .filter(|&t| t <= BRUTEFORCE_LIMIT)
        .ok_or_else(|| {
            Error::Invalid(format!(
                "brute force over S^n = {s}^{n} exceeds the limit of {BRUTEFORCE_LIMIT}"
            ))
        })?;

    let mut labels = vec![0usize; n];
    let mut best = Assignment {
        labels: labels.clone(),
        objective: inst.objective(&labels)?,
    };
    for _ in 1..total {
        // odometer increment, last position fastest
        for slot in labels.iter_mut().rev() {
            *slot += 1;
            if *slot < s {
                break;
            }
            *slot = 0;
        }
        let value = inst.objective(&labels)?;
        if value > best.objective {
            best.objective = value;
            best.labels.copy_from_slice(&labels);
        }
    }
    Ok(best)
}

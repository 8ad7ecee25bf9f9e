//! Information cascade: per-dimension KL weights that start high and are
//! relieved to a low value one dimension every `r` iterations.

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CascadeSchedule {
    pub beta_h: f64,
    pub beta_l: f64,
    pub r: u64,
    pub m: usize,
}

impl CascadeSchedule {
    pub fn new(beta_h: f64, beta_l: f64, r: u64, m: usize) -> Result<Self> {
        if !(beta_l >= 0.0 && beta_h >= beta_l) {
            return Err(Error::Config(format!(
                "cascade needs beta_h >= beta_l >= 0, got beta_h={beta_h} beta_l={beta_l}"
            )));
        }
        if r == 0 {
            return Err(Error::Config("relief period r must be at least 1".into()));
        }
        if m == 0 {
            return Err(Error::Config("cascade needs at least one dimension".into()));
        }
        Ok(CascadeSchedule { beta_h, beta_l, r, m })
    }

    /// Dimensions already relieved at iteration `t`: `min(m, floor(t / r))`.
    pub fn relieved_count(&self, t: u64) -> usize {
        (t / self.r).min(self.m as u64) as usize
    }

    /// β vector at iteration `t`; the relieved set is always a prefix.
    pub fn betas_at(&self, t: u64) -> Vec<f64> {
        let relieved = self.relieved_count(t);
        (0..self.m)
            .map(|j| if j < relieved { self.beta_l } else { self.beta_h })
            .collect()
    }
}

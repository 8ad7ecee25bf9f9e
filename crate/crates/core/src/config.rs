//! Training configuration and its flat `key=value` text form.
//!
//! The same text form is used by config files, by checkpoint headers and by
//! the run banner, so a configuration always round-trips exactly.

use crate::cascade::CascadeSchedule;
use crate::neural::Architecture;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_iter: u64,
    pub batch_size: usize,
    /// Warm-up: the discrete code is held at zero for iterations `t <= t_d`.
    pub t_d: u64,
    /// Relief period of the cascade.
    pub r: u64,
    pub beta_h: f64,
    pub beta_l: f64,
    pub lambda_prime: f64,
    pub m: usize,
    pub s_card: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    /// Write one trace row every this many iterations.
    pub trace_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 3e-4,
            max_iter: 30_000,
            batch_size: 64,
            t_d: 10_000,
            r: 1_500,
            beta_h: 10.0,
            beta_l: 1.0,
            lambda_prime: 0.001,
            m: 5,
            s_card: 3,
            seed: 0,
            hidden: vec![128, 128],
            trace_every: 1,
        }
    }
}

/// Keys accepted by [`TrainConfig::set`], in canonical order.
pub const CONFIG_KEYS: &[&str] = &[
    "learning_rate",
    "max_iter",
    "batch_size",
    "t_d",
    "r",
    "beta_h",
    "beta_l",
    "lambda_prime",
    "m",
    "s_card",
    "seed",
    "hidden",
    "trace_every",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("key {key}: cannot parse {value:?}")))
}

impl TrainConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "max_iter" => self.max_iter = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "t_d" => self.t_d = parse(key, value)?,
            "r" => self.r = parse(key, value)?,
            "beta_h" => self.beta_h = parse(key, value)?,
            "beta_l" => self.beta_l = parse(key, value)?,
            "lambda_prime" => self.lambda_prime = parse(key, value)?,
            "m" => self.m = parse(key, value)?,
            "s_card" => self.s_card = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "hidden" => {
                self.hidden = if value.trim().is_empty() {
                    Vec::new()
                } else {
                    value.split(',').map(|w| parse(key, w)).collect::<Result<_>>()?
                }
            }
            "trace_every" => self.trace_every = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "learning_rate" => self.learning_rate.to_string(),
            "max_iter" => self.max_iter.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "t_d" => self.t_d.to_string(),
            "r" => self.r.to_string(),
            "beta_h" => self.beta_h.to_string(),
            "beta_l" => self.beta_l.to_string(),
            "lambda_prime" => self.lambda_prime.to_string(),
            "m" => self.m.to_string(),
            "s_card" => self.s_card.to_string(),
            "seed" => self.seed.to_string(),
            "hidden" => self
                .hidden
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(","),
            "trace_every" => self.trace_every.to_string(),
            _ => return None,
        })
    }

    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        CONFIG_KEYS
            .iter()
            .map(|&k| (k, self.get(k).expect("canonical key")))
            .collect()
    }

    /// Applies a flat `key=value` text (`#` starts a comment) on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {raw:?}", lineno + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| match e {
                    Error::Config(msg) => Error::Config(format!("line {}: {msg}", lineno + 1)),
                    other => other,
                })?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.trace_every == 0 {
            return Err(Error::Config("trace_every must be at least 1".into()));
        }
        if !(self.lambda_prime >= 0.0 && self.lambda_prime.is_finite()) {
            return Err(Error::Config("lambda_prime must be finite and non-negative".into()));
        }
        if self.t_d < self.max_iter && self.lambda_prime > 0.0 && self.batch_size < 2 {
            return Err(Error::Config(
                "the collision penalty needs batch_size >= 2 once the discrete phase starts".into(),
            ));
        }
        if self.hidden.iter().any(|&w| w == 0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        self.schedule()?;
        Architecture::mlp(1, &self.hidden, self.m, self.s_card).validate(self.m, self.s_card)
    }

    pub fn schedule(&self) -> Result<CascadeSchedule> {
        CascadeSchedule::new(self.beta_h, self.beta_l, self.r, self.m)
    }

    pub fn architecture(&self, image_dim: usize) -> Architecture {
        Architecture::mlp(image_dim, &self.hidden, self.m, self.s_card)
    }

    /// The ablation without a cascade: every dimension at `beta_l` from the start.
    pub fn without_cascade(&self) -> Self {
        TrainConfig {
            beta_h: self.beta_l,
            ..self.clone()
        }
    }
}

impl std::fmt::Display for TrainConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, v) in self.to_pairs() {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_are_valid() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = TrainConfig::default();
        cfg.learning_rate = 1.0 / 3.0;
        cfg.hidden = vec![7, 9, 11];
        let mut back = TrainConfig::default();
        back.apply_text(&cfg.to_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn comments_and_unknown_keys() {
        let mut cfg = TrainConfig::default();
        cfg.apply_text("# header\nbeta_l = 2.0  # trailing\n\nm=4\n").unwrap();
        assert_eq!(cfg.beta_l, 2.0);
        assert_eq!(cfg.m, 4);
        let err = cfg.apply_text("bogus=1").unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
        assert!(cfg.apply_text("m=four").is_err());
        assert!(cfg.apply_text("just words").is_err());
    }

    #[test]
    fn validation_rules() {
        let base = TrainConfig::default();
        let bad = [
            TrainConfig { learning_rate: 0.0, ..base.clone() },
            TrainConfig { batch_size: 1, ..base.clone() },
            TrainConfig { beta_l: 11.0, ..base.clone() },
            TrainConfig { r: 0, ..base.clone() },
            TrainConfig { m: 0, ..base.clone() },
            TrainConfig { s_card: 0, ..base.clone() },
            TrainConfig { hidden: vec![0], ..base.clone() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        // Single-sample batches are fine when the discrete phase never starts.
        TrainConfig { batch_size: 1, t_d: 30_000, ..base.clone() }.validate().unwrap();
        TrainConfig { batch_size: 1, lambda_prime: 0.0, ..base }.validate().unwrap();
    }

    #[test]
    fn ablation_flattens_schedule() {
        let cfg = TrainConfig::default().without_cascade();
        assert_eq!(cfg.schedule().unwrap().betas_at(0), vec![1.0; 5]);
    }

    proptest! {
        #[test]
        fn float_keys_round_trip_bit_exact(lr in 1e-9f64..1.0, lam in 0.0f64..10.0) {
            let cfg = TrainConfig { learning_rate: lr, lambda_prime: lam, ..TrainConfig::default() };
            let mut back = TrainConfig::default();
            back.apply_text(&cfg.to_string()).unwrap();
            prop_assert_eq!(back.learning_rate.to_bits(), lr.to_bits());
            prop_assert_eq!(back.lambda_prime.to_bits(), lam.to_bits());
        }
    }
}

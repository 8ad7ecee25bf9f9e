//! Alternating training loop.
//!
//! Each iteration `t = 1, 2, …` draws a minibatch, samples `z` once from the
//! encoder, and, after the warm-up (`t > t_d`), picks the discrete code of
//! every sample by an exact min-cost-flow solve over the decoder
//! log-likelihoods at that `z`. The codes are then held fixed while one Adam
//! step is taken on reconstruction plus cascade-weighted KL.

mod checkpoint;
mod trace;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use trace::{TraceRow, TraceWriter, TRACE_HEADER};

pub use crate::neural::LossBreakdown;

use std::path::Path;

use crate::assignment::{one_hot, solve_mcf, AssignmentInstance};
use crate::cascade::CascadeSchedule;
use crate::config::TrainConfig;
use crate::data::Dataset;
use crate::neural::{
    adam_step, bernoulli_loglik, breakdown, collision_term, decode, encode, forward_backward, init_params,
    reparameterize_with_noise, standard_normal, AdamState, MlpParams,
};
use crate::{Error, Matrix, Prng, Result};

/// Everything that evolves during training.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub params: MlpParams,
    pub adam: AdamState,
    /// Completed iterations.
    pub iter: u64,
    /// Reparameterization noise stream.
    pub rng: Prng,
}

impl TrainState {
    pub fn new(config: &TrainConfig, image_dim: usize) -> Result<Self> {
        let root = Prng::new(config.seed);
        let params = init_params(&config.architecture(image_dim), config.m, config.s_card, &root)?;
        Ok(TrainState {
            adam: AdamState::new(&params),
            params,
            iter: 0,
            rng: root.derive("noise"),
        })
    }

    /// Errors unless the parameters have exactly the shape `config` would build.
    pub fn check_compatible(&self, config: &TrainConfig, image_dim: usize) -> Result<()> {
        let expected = config.architecture(image_dim);
        let actual = self.params.architecture();
        if expected != actual
            || self.params.latent_dim() != config.m
            || self.params.discrete_card() != config.s_card
        {
            return Err(Error::Config(format!(
                "parameter architecture {actual:?} does not match configuration {expected:?}"
            )));
        }
        Ok(())
    }
}

/// Discrete codes used by one step.
#[derive(Clone, Debug, PartialEq)]
pub enum StepCodes {
    /// `t <= t_d`: every code is the zero vector and no solve happens.
    WarmUp,
    Assigned(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub iter: u64,
    pub loss: LossBreakdown,
    pub codes: StepCodes,
    pub relieved: usize,
}

/// Decoder log-likelihood of each sample under every discrete value, at `z`.
pub fn likelihood_matrix(params: &MlpParams, z: &Matrix, batch: &Matrix) -> Result<Matrix> {
    let (n, s) = (batch.rows(), params.discrete_card());
    let mut u = Matrix::zeros(n, s);
    for k in 0..s {
        let codes = one_hot(&vec![k; n], s);
        let probs = decode(params, z, &codes)?.probs;
        for (i, ll) in bernoulli_loglik(&probs, batch)?.into_iter().enumerate() {
            u.set(i, k, ll);
        }
    }
    Ok(u)
}

/// One iteration of the alternating scheme on `batch`.
pub fn train_step(
    state: &mut TrainState,
    batch: &Matrix,
    config: &TrainConfig,
    schedule: &CascadeSchedule,
) -> Result<StepOutcome> {
    let t = state.iter + 1;
    let betas = schedule.betas_at(t);
    let n = batch.rows();
    let s = config.s_card;

    let enc = encode(&state.params, batch)?;
    let eps = standard_normal(n, config.m, &mut state.rng);

    let (d_onehot, codes) = if t > config.t_d {
        let z = reparameterize_with_noise(&enc.posterior, &eps)?;
        let u = likelihood_matrix(&state.params, &z, batch)?;
        let assignment = solve_mcf(&AssignmentInstance::new(u, config.lambda_prime)?)?;
        (one_hot(&assignment.labels, s), StepCodes::Assigned(assignment.labels))
    } else {
        (Matrix::zeros(n, s), StepCodes::WarmUp)
    };

    let fb = forward_backward(&state.params, &enc, batch, &d_onehot, &betas, &eps)?;
    let loss = breakdown(&fb.loglik, &fb.kl, &betas, collision_term(&d_onehot, config.lambda_prime));
    adam_step(&mut state.params, &fb.grads, &mut state.adam, config.learning_rate)?;
    state.iter = t;
    Ok(StepOutcome {
        iter: t,
        loss,
        codes,
        relieved: schedule.relieved_count(t),
    })
}

/// Epoch-wise shuffling without replacement. The order is a pure function of
/// `(seed, position)`, so resuming needs no extra state.
#[derive(Clone, Debug)]
pub struct EpochBatcher {
    root: Prng,
    len: usize,
    batch_size: usize,
    epoch: Option<(u64, Vec<usize>)>,
}

impl EpochBatcher {
    pub fn new(seed: u64, len: usize, batch_size: usize) -> Self {
        EpochBatcher {
            root: Prng::new(seed),
            len,
            batch_size,
            epoch: None,
        }
    }

    fn position(&mut self, pos: u64) -> usize {
        let epoch = pos / self.len as u64;
        if self.epoch.as_ref().map(|(e, _)| *e) != Some(epoch) {
            let perm = self.root.derive_indexed("shuffle", epoch).permutation(self.len);
            self.epoch = Some((epoch, perm));
        }
        let (_, perm) = self.epoch.as_ref().expect("epoch cached");
        perm[(pos % self.len as u64) as usize]
    }

    /// Dataset rows for iteration `t` (1-based). A batch may straddle two epochs.
    pub fn rows(&mut self, t: u64) -> Vec<usize> {
        let start = (t - 1) * self.batch_size as u64;
        (0..self.batch_size as u64).map(|o| self.position(start + o)).collect()
    }
}

/// Owns the dataset view and drives [`train_step`].
pub struct Trainer {
    pub config: TrainConfig,
    pub state: TrainState,
    schedule: CascadeSchedule,
    images: Matrix,
    batcher: EpochBatcher,
}

impl Trainer {
    pub fn new(config: TrainConfig, dataset: &Dataset) -> Result<Self> {
        let state = TrainState::new(&config, dataset.pixels_per_image())?;
        Self::resume(config, state, dataset)
    }

    pub fn resume(config: TrainConfig, state: TrainState, dataset: &Dataset) -> Result<Self> {
        config.validate()?;
        if dataset.is_empty() {
            return Err(Error::Invalid("cannot train on an empty dataset".into()));
        }
        state.check_compatible(&config, dataset.pixels_per_image())?;
        Ok(Trainer {
            schedule: config.schedule()?,
            batcher: EpochBatcher::new(config.seed, dataset.len(), config.batch_size),
            images: dataset.all_images(),
            config,
            state,
        })
    }

    pub fn step(&mut self) -> Result<StepOutcome> {
        let rows = self.batcher.rows(self.state.iter + 1);
        let batch = self.images.select_rows(&rows);
        train_step(&mut self.state, &batch, &self.config, &self.schedule)
    }

    /// Steps until `until` iterations are complete, handing every outcome to `observe`.
    pub fn run_until(
        &mut self,
        until: u64,
        mut observe: impl FnMut(&StepOutcome) -> Result<()>,
    ) -> Result<()> {
        while self.state.iter < until {
            let outcome = self.step()?;
            observe(&outcome)?;
        }
        Ok(())
    }

    /// Runs to `until`, writing trace rows at the configured cadence.
    pub fn run_traced<W: std::io::Write>(&mut self, until: u64, trace: &mut TraceWriter<W>) -> Result<()> {
        let every = self.config.trace_every;
        self.run_until(until, |o| {
            if o.iter % every == 0 {
                trace.write(&TraceRow::from(o))?;
            }
            Ok(())
        })
    }

    pub fn into_state(self) -> TrainState {
        self.state
    }
}

/// Trains from scratch for `config.max_iter` iterations, writing the final
/// checkpoint and a per-step CSV trace.
pub fn train_run(
    config: &TrainConfig,
    dataset: &Dataset,
    checkpoint_path: impl AsRef<Path>,
    trace_path: impl AsRef<Path>,
) -> Result<TrainState> {
    let mut trainer = Trainer::new(config.clone(), dataset)?;
    let mut trace = TraceWriter::create(trace_path.as_ref())?;
    trainer.run_traced(config.max_iter, &mut trace)?;
    trace.finish()?;
    save_checkpoint(&trainer.state, config, checkpoint_path)?;
    Ok(trainer.into_state())
}

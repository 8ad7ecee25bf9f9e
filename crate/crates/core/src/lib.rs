//! CascadeVAE: a variational autoencoder that disentangles continuous and
//! discrete latent factors.
//!
//! Continuous dimensions are released from a heavy KL penalty one at a time
//! (the information cascade, see [`cascade`]), while a single categorical code
//! is inferred per minibatch by an exact min-cost-flow assignment (see
//! [`assignment`]). Everything is deterministic given a seed.

pub mod assignment;
pub mod cascade;
pub mod config;
pub mod data;
mod error;
pub mod metrics;
pub mod neural;
pub mod pgm;
pub mod rng;
pub mod trainer;
pub mod traverse;

pub use error::{Error, Result};
pub use neural::Matrix;
pub use rng::Prng;

//! Dense MLP encoder/decoder with hand-derived reverse-mode gradients.

mod adam;
mod loss;
mod matrix;
mod mlp;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use loss::{
    collision_term, finite_diff_check, loss_and_grads, loss_and_grads_with_noise, random_gradient_check,
    LossBreakdown,
};
pub use matrix::Matrix;
pub use mlp::{
    bernoulli_loglik, decoder_forward, encoder_forward, gaussian_kl_per_dim, init_params,
    reparameterize, reparameterize_with_noise, standard_normal, Architecture, GaussianPosterior,
    Layer, MlpParams, LOG_VAR_MAX, LOG_VAR_MIN, PROB_MAX, PROB_MIN,
};

pub(crate) use loss::breakdown;
pub(crate) use mlp::{decode, encode, forward_backward};

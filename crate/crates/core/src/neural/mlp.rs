use super::matrix::{accumulate_weight_grad, affine, backprop_input, Matrix};
use crate::{Error, Prng, Result};

pub const LOG_VAR_MIN: f64 = -10.0;
pub const LOG_VAR_MAX: f64 = 10.0;
pub const PROB_MIN: f64 = 1e-7;
pub const PROB_MAX: f64 = 1.0 - 1e-7;

/// Layer widths for both networks, input and output included.
///
/// The encoder maps `D → … → 2m` (mean and log-variance stacked); the decoder
/// maps `m + S → … → D`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub encoder: Vec<usize>,
    pub decoder: Vec<usize>,
}

impl Architecture {
    /// Mirrored MLP with the given hidden widths on both sides.
    pub fn mlp(image_dim: usize, hidden: &[usize], latent_dim: usize, discrete_card: usize) -> Self {
        let mut encoder = vec![image_dim];
        encoder.extend_from_slice(hidden);
        encoder.push(2 * latent_dim);
        let mut decoder = vec![latent_dim + discrete_card];
        decoder.extend_from_slice(hidden);
        decoder.push(image_dim);
        Architecture { encoder, decoder }
    }

    pub fn validate(&self, latent_dim: usize, discrete_card: usize) -> Result<()> {
        if latent_dim == 0 {
            return Err(Error::Config("latent dimension m must be at least 1".into()));
        }
        if discrete_card == 0 {
            return Err(Error::Config("discrete cardinality S must be at least 1".into()));
        }
        if self.encoder.len() < 2 || self.decoder.len() < 2 {
            return Err(Error::Config("each network needs at least an input and output width".into()));
        }
        if self.encoder.iter().chain(&self.decoder).any(|&w| w == 0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        let enc_out = *self.encoder.last().unwrap();
        if enc_out != 2 * latent_dim {
            return Err(Error::Config(format!(
                "encoder output width {enc_out} must equal 2m = {}",
                2 * latent_dim
            )));
        }
        if self.decoder[0] != latent_dim + discrete_card {
            return Err(Error::Config(format!(
                "decoder input width {} must equal m + S = {}",
                self.decoder[0],
                latent_dim + discrete_card
            )));
        }
        if *self.decoder.last().unwrap() != self.encoder[0] {
            return Err(Error::Config(format!(
                "decoder output width {} must equal image dimension {}",
                self.decoder.last().unwrap(),
                self.encoder[0]
            )));
        }
        Ok(())
    }
}

/// Weight is `fan_in × fan_out`; bias is `1 × fan_out`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Matrix,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Layer {
            weight: Matrix::zeros(fan_in, fan_out),
            bias: Matrix::zeros(1, fan_out),
        }
    }

    fn forward(&self, x: &Matrix) -> Matrix {
        affine(x, &self.weight, self.bias.as_slice())
    }
}

/// Encoder (φ) and decoder (θ) parameters. Also used as the gradient and
/// Adam-moment container, since those share its shape.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    pub encoder: Vec<Layer>,
    pub decoder: Vec<Layer>,
    latent_dim: usize,
    discrete_card: usize,
}

impl MlpParams {
    pub fn zeros(arch: &Architecture, latent_dim: usize, discrete_card: usize) -> Result<Self> {
        arch.validate(latent_dim, discrete_card)?;
        let build = |w: &[usize]| w.windows(2).map(|p| Layer::zeros(p[0], p[1])).collect();
        Ok(MlpParams {
            encoder: build(&arch.encoder),
            decoder: build(&arch.decoder),
            latent_dim,
            discrete_card,
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.arrays_mut().into_iter().for_each(|a| a.fill(0.0));
        z
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn discrete_card(&self) -> usize {
        self.discrete_card
    }

    pub fn image_dim(&self) -> usize {
        self.encoder[0].weight.rows()
    }

    pub fn architecture(&self) -> Architecture {
        let widths = |layers: &[Layer]| {
            let mut w = vec![layers[0].weight.rows()];
            w.extend(layers.iter().map(|l| l.weight.cols()));
            w
        };
        Architecture {
            encoder: widths(&self.encoder),
            decoder: widths(&self.decoder),
        }
    }

    /// Stable names for every parameter array, in [`Self::arrays`] order.
    pub fn array_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (prefix, layers) in [("enc", &self.encoder), ("dec", &self.decoder)] {
            for i in 0..layers.len() {
                names.push(format!("{prefix}.{i}.weight"));
                names.push(format!("{prefix}.{i}.bias"));
            }
        }
        names
    }

    pub fn arrays(&self) -> Vec<&Matrix> {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .flat_map(|l| [&l.weight, &l.bias])
            .collect()
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut Matrix> {
        self.encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.arrays().iter().map(|a| a.as_slice().len()).sum()
    }

    pub(crate) fn same_shape(&self, other: &MlpParams) -> bool {
        let a = self.arrays();
        let b = other.arrays();
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.shape() == y.shape())
    }
}

/// Glorot-uniform weights, zero biases. Draws from the `"init"` sub-stream.
pub fn init_params(
    arch: &Architecture,
    latent_dim: usize,
    discrete_card: usize,
    rng: &Prng,
) -> Result<MlpParams> {
    let mut params = MlpParams::zeros(arch, latent_dim, discrete_card)?;
    let mut rng = rng.derive("init");
    for layer in params.encoder.iter_mut().chain(params.decoder.iter_mut()) {
        let (fan_in, fan_out) = layer.weight.shape();
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for w in layer.weight.as_mut_slice() {
            *w = rng.uniform_range(-limit, limit);
        }
    }
    Ok(params)
}

/// Diagonal Gaussian q(z|x) per row.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPosterior {
    pub mu: Matrix,
    pub log_var: Matrix,
}

impl GaussianPosterior {
    pub fn len(&self) -> usize {
        self.mu.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.rows() == 0
    }
}

/// Activations kept for the backward pass through one MLP.
pub(crate) struct MlpTrace {
    /// Input to each layer; entry 0 is the network input.
    inputs: Vec<Matrix>,
}

fn relu_inplace(m: &mut Matrix) {
    m.map_inplace(|v| if v > 0.0 { v } else { 0.0 });
}

/// Hidden layers use ReLU; the last layer is left linear.
fn mlp_forward(layers: &[Layer], x: &Matrix) -> (Matrix, MlpTrace) {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut h = x.clone();
    for (i, layer) in layers.iter().enumerate() {
        let mut next = layer.forward(&h);
        if i + 1 < layers.len() {
            relu_inplace(&mut next);
        }
        inputs.push(h);
        h = next;
    }
    (h, MlpTrace { inputs })
}

/// Backward through an MLP given the gradient at its (linear) output.
/// Accumulates into `grads`; returns the gradient at the input if asked.
fn mlp_backward(
    layers: &[Layer],
    trace: &MlpTrace,
    mut d_out: Matrix,
    grads: &mut [Layer],
    want_input_grad: bool,
) -> Option<Matrix> {
    for i in (0..layers.len()).rev() {
        let input = &trace.inputs[i];
        let g = &mut grads[i];
        accumulate_weight_grad(input, &d_out, &mut g.weight, g.bias.as_mut_slice());
        if i == 0 && !want_input_grad {
            return None;
        }
        let mut d_in = backprop_input(&d_out, &layers[i].weight);
        if i > 0 {
            // input[i] is the ReLU output of layer i-1.
            for (d, &a) in d_in.as_mut_slice().iter_mut().zip(input.as_slice()) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        d_out = d_in;
    }
    Some(d_out)
}

fn check_cols(op: &'static str, m: &Matrix, cols: usize) -> Result<()> {
    if m.cols() != cols {
        return Err(Error::shape(op, format!("{cols} columns"), format!("{} columns", m.cols())));
    }
    Ok(())
}

pub(crate) struct EncoderPass {
    pub posterior: GaussianPosterior,
    raw_log_var: Matrix,
    trace: MlpTrace,
}

pub(crate) fn encode(params: &MlpParams, images: &Matrix) -> Result<EncoderPass> {
    check_cols("encoder_forward", images, params.image_dim())?;
    let m = params.latent_dim;
    let (out, trace) = mlp_forward(&params.encoder, images);
    let mu = out.column_block(0, m);
    let raw_log_var = out.column_block(m, m);
    let mut log_var = raw_log_var.clone();
    log_var.map_inplace(|v| v.clamp(LOG_VAR_MIN, LOG_VAR_MAX));
    Ok(EncoderPass {
        posterior: GaussianPosterior { mu, log_var },
        raw_log_var,
        trace,
    })
}

/// q_φ(z|x) for a batch of flattened images with pixels in `[0, 1]`.
pub fn encoder_forward(params: &MlpParams, images: &Matrix) -> Result<GaussianPosterior> {
    encode(params, images).map(|p| p.posterior)
}

/// `z = μ + exp(log_var / 2) · ε` with caller-supplied noise.
pub fn reparameterize_with_noise(post: &GaussianPosterior, eps: &Matrix) -> Result<Matrix> {
    if eps.shape() != post.mu.shape() {
        return Err(Error::shape(
            "reparameterize",
            format!("{:?}", post.mu.shape()),
            format!("{:?}", eps.shape()),
        ));
    }
    let mut z = post.mu.clone();
    for ((zv, &lv), &e) in z
        .as_mut_slice()
        .iter_mut()
        .zip(post.log_var.as_slice())
        .zip(eps.as_slice())
    {
        *zv += (0.5 * lv).exp() * e;
    }
    Ok(z)
}

/// Standard-normal noise matrix drawn by Box–Muller.
pub fn standard_normal(rows: usize, cols: usize, rng: &mut Prng) -> Matrix {
    let mut eps = Matrix::zeros(rows, cols);
    rng.fill_standard_normal(eps.as_mut_slice());
    eps
}

/// One reparameterized sample per row of the posterior.
pub fn reparameterize(post: &GaussianPosterior, rng: &mut Prng) -> Matrix {
    let eps = standard_normal(post.mu.rows(), post.mu.cols(), rng);
    reparameterize_with_noise(post, &eps).expect("noise shaped from posterior")
}

fn validate_onehot(d: &Matrix) -> Result<()> {
    for (i, row) in d.iter_rows().enumerate() {
        let mut ones = 0;
        for &v in row {
            if v == 1.0 {
                ones += 1;
            } else if v != 0.0 {
                return Err(Error::Invalid(format!(
                    "discrete code row {i} has entry {v}; expected 0 or 1"
                )));
            }
        }
        if ones > 1 {
            return Err(Error::Invalid(format!(
                "discrete code row {i} has {ones} active categories"
            )));
        }
    }
    Ok(())
}

pub(crate) struct DecoderPass {
    /// Clamped Bernoulli means.
    pub probs: Matrix,
    /// Whether each mean hit the clamp (zero gradient there).
    clamped: Vec<bool>,
    trace: MlpTrace,
}

pub(crate) fn decode(params: &MlpParams, z: &Matrix, d_onehot: &Matrix) -> Result<DecoderPass> {
    check_cols("decoder_forward", z, params.latent_dim)?;
    check_cols("decoder_forward", d_onehot, params.discrete_card)?;
    if z.rows() != d_onehot.rows() {
        return Err(Error::shape("decoder_forward", z.rows(), d_onehot.rows()));
    }
    validate_onehot(d_onehot)?;
    let input = z.hconcat(d_onehot)?;
    let (mut logits, trace) = mlp_forward(&params.decoder, &input);
    let mut clamped = Vec::with_capacity(logits.as_slice().len());
    logits.map_inplace(|l| 1.0 / (1.0 + (-l).exp()));
    for p in logits.as_mut_slice() {
        let c = p.clamp(PROB_MIN, PROB_MAX);
        clamped.push(c != *p);
        *p = c;
    }
    Ok(DecoderPass {
        probs: logits,
        clamped,
        trace,
    })
}

/// Bernoulli means p_θ(x|z,d), clamped to `[1e-7, 1 - 1e-7]`.
///
/// A row of `d_onehot` may be all zeros (warm-up) or a single one.
pub fn decoder_forward(params: &MlpParams, z: &Matrix, d_onehot: &Matrix) -> Result<Matrix> {
    decode(params, z, d_onehot).map(|p| p.probs)
}

/// Per-sample `Σ_pixels x ln p + (1 - x) ln(1 - p)`.
pub fn bernoulli_loglik(probs: &Matrix, x: &Matrix) -> Result<Vec<f64>> {
    if probs.shape() != x.shape() {
        return Err(Error::shape(
            "bernoulli_loglik",
            format!("{:?}", probs.shape()),
            format!("{:?}", x.shape()),
        ));
    }
    Ok(probs
        .iter_rows()
        .zip(x.iter_rows())
        .map(|(p, x)| {
            p.iter()
                .zip(x)
                .map(|(&p, &x)| x * p.ln() + (1.0 - x) * (1.0 - p).ln())
                .sum()
        })
        .collect())
}

/// KL(q(z_j|x_i) ‖ N(0, 1)) for every sample `i` and dimension `j`.
pub fn gaussian_kl_per_dim(post: &GaussianPosterior) -> Matrix {
    let mut kl = post.mu.clone();
    for (k, &lv) in kl.as_mut_slice().iter_mut().zip(post.log_var.as_slice()) {
        let mu = *k;
        *k = 0.5 * (mu * mu + lv.exp() - 1.0 - lv);
    }
    kl
}

/// Scores of the loss terms that the caller differentiates.
pub(crate) struct ForwardBackward {
    pub loglik: Vec<f64>,
    pub kl: Matrix,
    pub grads: MlpParams,
}

/// Exact gradient of `-mean_i loglik_i + mean_i Σ_j β_j KL_ij` with the noise
/// and discrete codes held fixed.
pub(crate) fn forward_backward(
    params: &MlpParams,
    enc: &EncoderPass,
    batch: &Matrix,
    d_onehot: &Matrix,
    betas: &[f64],
    eps: &Matrix,
) -> Result<ForwardBackward> {
    let n = batch.rows();
    let m = params.latent_dim;
    if betas.len() != m {
        return Err(Error::shape("loss_and_grads", format!("{m} betas"), betas.len()));
    }
    if d_onehot.rows() != n {
        return Err(Error::shape("loss_and_grads", format!("{n} code rows"), d_onehot.rows()));
    }
    let post = &enc.posterior;
    let z = reparameterize_with_noise(post, eps)?;
    let dec = decode(params, &z, d_onehot)?;
    let loglik = bernoulli_loglik(&dec.probs, batch)?;
    let kl = gaussian_kl_per_dim(post);

    let mut grads = params.zeros_like();
    if n == 0 {
        return Ok(ForwardBackward { loglik, kl, grads });
    }
    let inv_n = 1.0 / n as f64;

    // d(-loglik/n)/d logit = (p - x)/n wherever the sigmoid is not clamped.
    let mut d_logits = dec.probs.clone();
    for ((g, &x), &clamped) in d_logits
        .as_mut_slice()
        .iter_mut()
        .zip(batch.as_slice())
        .zip(&dec.clamped)
    {
        *g = if clamped { 0.0 } else { (*g - x) * inv_n };
    }
    let d_input = mlp_backward(&params.decoder, &dec.trace, d_logits, &mut grads.decoder, true)
        .expect("input gradient requested");

    let mut d_enc_out = Matrix::zeros(n, 2 * m);
    for i in 0..n {
        let dz = &d_input.row(i)[..m];
        let mu = post.mu.row(i);
        let lv = post.log_var.row(i);
        let raw = enc.raw_log_var.row(i);
        let e = eps.row(i);
        let out = d_enc_out.row_mut(i);
        for j in 0..m {
            let beta = betas[j] * inv_n;
            out[j] = dz[j] + beta * mu[j];
            let live = raw[j] > LOG_VAR_MIN && raw[j] < LOG_VAR_MAX;
            out[m + j] = if live {
                let sigma = (0.5 * lv[j]).exp();
                dz[j] * 0.5 * sigma * e[j] + beta * 0.5 * (sigma * sigma - 1.0)
            } else {
                0.0
            };
        }
    }
    mlp_backward(&params.encoder, &enc.trace, d_enc_out, &mut grads.encoder, false);
    Ok(ForwardBackward { loglik, kl, grads })
}

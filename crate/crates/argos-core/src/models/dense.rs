//! Dense autoencoder family: plain, denoising, and variational.
//!
//! Networks follow the fixed [D, 64, 16, 64, D] stack with ReLU hidden
//! activations and a sigmoid output. The VAE reuses the same stack with
//! a linear latent layer acting as the mean head, plus a separate
//! log-variance head; training samples the latent via the
//! reparameterization trick while inference always uses the mean.
//!
//! Parameters live in f64 while training (the gradient-check tolerance
//! demands it); serialization narrows to f32.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{kl_gaussian, validate_training_data, ModelError, DEFAULT_HIDDEN, DEFAULT_LATENT};

/// Log-variance outputs are clamped to this range before use.
pub const LOGVAR_CLAMP: (f64, f64) = (-10.0, 10.0);

/// Hyperparameters for gradient training. The defaults are the pipeline
/// defaults used by every subcommand unless overridden.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 50,
            learning_rate: 1e-3,
            batch_size: 32,
            momentum: 0.9,
        }
    }
}

/// Loss bookkeeping returned by the trainers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats {
    pub initial_loss: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layer {
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    /// Row-major weights: w[r * cols + c].
    pub(crate) w: Vec<f64>,
    pub(crate) b: Vec<f64>,
}

impl Layer {
    fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        let w = (0..rows * cols).map(|_| rng.random_range(-a..a)).collect();
        Self {
            rows,
            cols,
            w,
            b: vec![0.0; rows],
        }
    }

    pub(crate) fn zeros_like(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            w: vec![0.0; self.w.len()],
            b: vec![0.0; self.b.len()],
        }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.cols);
        out.clear();
        for r in 0..self.rows {
            let row = &self.w[r * self.cols..(r + 1) * self.cols];
            out.push(self.b[r] + dot(row, x));
        }
    }

    /// delta ⊗ input accumulated into the gradient buffer.
    fn accumulate_grad(&self, grad: &mut Layer, delta: &[f64], input: &[f64]) {
        for r in 0..self.rows {
            let d = delta[r];
            let row = &mut grad.w[r * self.cols..(r + 1) * self.cols];
            for (gw, xv) in row.iter_mut().zip(input) {
                *gw += d * xv;
            }
            grad.b[r] += d;
        }
    }

    /// Wᵀ · delta.
    fn backprop_delta(&self, delta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let d = delta[r];
            let row = &self.w[r * self.cols..(r + 1) * self.cols];
            for (o, wv) in out.iter_mut().zip(row) {
                *o += d * wv;
            }
        }
        out
    }

    fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// Dot product with four independent accumulators so the multiplies
/// pipeline instead of serialising on one add chain.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let mut ai = a.chunks_exact(4);
    let mut bi = b.chunks_exact(4);
    for (ca, cb) in ai.by_ref().zip(bi.by_ref()) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    let mut tail = 0.0;
    for (xa, xb) in ai.remainder().iter().zip(bi.remainder()) {
        tail += xa * xb;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// The four-layer reconstruction stack.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    dims: Vec<usize>,
    /// Identity (true) or ReLU (false) on the latent layer output. The
    /// VAE needs a linear mean head; the plain stacks use ReLU.
    latent_linear: bool,
    pub(crate) layers: Vec<Layer>,
}

impl DenseNetwork {
    /// Standard architecture for a given input width.
    pub fn new(input_width: usize, latent_linear: bool, rng: &mut ChaCha8Rng) -> Self {
        Self::with_dims(
            &[
                input_width,
                DEFAULT_HIDDEN,
                DEFAULT_LATENT,
                DEFAULT_HIDDEN,
                input_width,
            ],
            latent_linear,
            rng,
        )
    }

    /// Arbitrary five-entry stack, used by the tests' toy networks.
    pub fn with_dims(dims: &[usize], latent_linear: bool, rng: &mut ChaCha8Rng) -> Self {
        assert_eq!(dims.len(), 5, "the reconstruction stack has five widths");
        let layers = (0..4)
            .map(|i| Layer::glorot(dims[i + 1], dims[i], rng))
            .collect();
        Self {
            dims: dims.to_vec(),
            latent_linear,
            layers,
        }
    }

    pub fn input_width(&self) -> usize {
        self.dims[0]
    }

    pub fn latent_width(&self) -> usize {
        self.dims[2]
    }

    pub fn hidden_width(&self) -> usize {
        self.dims[1]
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn latent_linear(&self) -> bool {
        self.latent_linear
    }

    pub(crate) fn from_parts(dims: Vec<usize>, latent_linear: bool, layers: Vec<Layer>) -> Self {
        Self {
            dims,
            latent_linear,
            layers,
        }
    }

    fn activate(&self, layer_idx: usize, pre: &mut [f64]) {
        if layer_idx == self.layers.len() - 1 {
            for v in pre.iter_mut() {
                *v = sigmoid(*v);
            }
        } else if layer_idx == 1 && self.latent_linear {
            // identity
        } else {
            for v in pre.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
    }

    /// Full mean-path forward pass (the scoring path for every variant).
    pub fn reconstruct(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.affine(&cur, &mut next);
            self.activate(i, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Flattened parameter copy (layer by layer, weights then bias).
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let mut pos = 0;
        for l in &mut self.layers {
            let (nw, nb) = (l.w.len(), l.b.len());
            l.w.copy_from_slice(&flat[pos..pos + nw]);
            pos += nw;
            l.b.copy_from_slice(&flat[pos..pos + nb]);
            pos += nb;
        }
    }
}

/// Log-variance head of the variational encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeHead {
    pub(crate) layer: Layer,
}

impl VaeHead {
    pub fn new(hidden: usize, latent: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            layer: Layer::glorot(latent, hidden, rng),
        }
    }

    pub(crate) fn from_layer(layer: Layer) -> Self {
        Self { layer }
    }

    pub fn param_count(&self) -> usize {
        self.layer.param_count()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = self.layer.w.clone();
        out.extend_from_slice(&self.layer.b);
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count());
        let nw = self.layer.w.len();
        self.layer.w.copy_from_slice(&flat[..nw]);
        self.layer.b.copy_from_slice(&flat[nw..]);
    }
}

struct GradBuf {
    layers: Vec<Layer>,
}

impl GradBuf {
    fn zeros(net: &DenseNetwork) -> Self {
        Self {
            layers: net.layers.iter().map(Layer::zeros_like).collect(),
        }
    }

    fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v *= s;
            }
        }
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }
}

/// Forward pass with cached pre-activations and activations, as needed
/// for backprop. acts[0] is the input; acts[i+1] = f(pre[i]).
fn forward_cached(net: &DenseNetwork, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut pre = Vec::with_capacity(net.layers.len());
    let mut acts = Vec::with_capacity(net.layers.len() + 1);
    acts.push(x.to_vec());
    for (i, layer) in net.layers.iter().enumerate() {
        let mut p = Vec::new();
        layer.affine(acts.last().unwrap(), &mut p);
        pre.push(p.clone());
        let mut a = p;
        net.activate(i, &mut a);
        acts.push(a);
    }
    (pre, acts)
}

fn relu_mask(delta: &mut [f64], pre: &[f64]) {
    for (d, p) in delta.iter_mut().zip(pre) {
        if *p <= 0.0 {
            *d = 0.0;
        }
    }
}

/// Mean reconstruction loss over (input, target) pairs and its gradient,
/// accumulated into `grads`. Inputs and targets coincide for the plain
/// autoencoder; the denoising variant feeds corrupted inputs with clean
/// targets.
fn recon_batch(
    net: &DenseNetwork,
    pairs: &[(&[f64], &[f64])],
    grads: &mut GradBuf,
) -> f64 {
    let d_out = net.dims[4] as f64;
    let mut total_loss = 0.0;
    for &(input, target) in pairs {
        let (pre, acts) = forward_cached(net, input);
        let y = acts.last().unwrap();
        let mut loss = 0.0;
        // dL/dy ∘ sigmoid' with L = (1/D)Σ(y−t)².
        let mut delta: Vec<f64> = y
            .iter()
            .zip(target)
            .map(|(&yi, &ti)| {
                loss += (yi - ti) * (yi - ti);
                2.0 / d_out * (yi - ti) * yi * (1.0 - yi)
            })
            .collect();
        total_loss += loss / d_out;
        for li in (0..net.layers.len()).rev() {
            net.layers[li].accumulate_grad(&mut grads.layers[li], &delta, &acts[li]);
            if li == 0 {
                break;
            }
            delta = net.layers[li].backprop_delta(&delta);
            let is_linear_latent = li - 1 == 1 && net.latent_linear;
            if !is_linear_latent {
                relu_mask(&mut delta, &pre[li - 1]);
            }
        }
    }
    let n = pairs.len().max(1) as f64;
    grads.scale(1.0 / n);
    total_loss / n
}

/// Mean reconstruction loss and flattened gradient for explicit
/// (input, target) pairs. This is the hook the gradient-check tests
/// differentiate numerically.
pub fn recon_loss_grad(
    net: &DenseNetwork,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
) -> (f64, Vec<f64>) {
    assert_eq!(inputs.len(), targets.len());
    let pairs: Vec<(&[f64], &[f64])> = inputs
        .iter()
        .zip(targets)
        .map(|(i, t)| (i.as_slice(), t.as_slice()))
        .collect();
    let mut grads = GradBuf::zeros(net);
    let loss = recon_batch(net, &pairs, &mut grads);
    (loss, grads.flatten())
}

/// Mean VAE loss (reconstruction MSE + beta·KL) and its gradient for
/// fixed latent noise draws, one eta per sample. Exposed with explicit
/// noise so numeric differentiation sees a deterministic function.
pub fn vae_loss_grad(
    net: &DenseNetwork,
    head: &VaeHead,
    xs: &[Vec<f64>],
    etas: &[Vec<f64>],
    beta: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    assert_eq!(xs.len(), etas.len());
    let mut grads = GradBuf::zeros(net);
    let mut head_grad = head.layer.zeros_like();
    let loss = vae_batch(net, head, xs, etas, beta, &mut grads, &mut head_grad);
    let mut hg = head_grad.w;
    hg.extend_from_slice(&head_grad.b);
    (loss, grads.flatten(), hg)
}

fn vae_batch(
    net: &DenseNetwork,
    head: &VaeHead,
    xs: &[Vec<f64>],
    etas: &[Vec<f64>],
    beta: f64,
    grads: &mut GradBuf,
    head_grad: &mut Layer,
) -> f64 {
    debug_assert!(net.latent_linear);
    let d_out = net.dims[4] as f64;
    let mut total_loss = 0.0;
    for (x, eta) in xs.iter().zip(etas) {
        // Encoder.
        let mut p1 = Vec::new();
        net.layers[0].affine(x, &mut p1);
        let mut a1 = p1.clone();
        for v in a1.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let mut mu = Vec::new();
        net.layers[1].affine(&a1, &mut mu);
        let mut lv_raw = Vec::new();
        head.layer.affine(&a1, &mut lv_raw);
        let lv: Vec<f64> = lv_raw
            .iter()
            .map(|&v| v.clamp(LOGVAR_CLAMP.0, LOGVAR_CLAMP.1))
            .collect();
        // Reparameterized latent.
        let sd: Vec<f64> = lv.iter().map(|&v| (0.5 * v).exp()).collect();
        let z: Vec<f64> = mu
            .iter()
            .zip(&sd)
            .zip(eta)
            .map(|((&m, &s), &e)| m + s * e)
            .collect();
        // Decoder.
        let mut p3 = Vec::new();
        net.layers[2].affine(&z, &mut p3);
        let mut a3 = p3.clone();
        for v in a3.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let mut p4 = Vec::new();
        net.layers[3].affine(&a3, &mut p4);
        let y: Vec<f64> = p4.iter().map(|&v| sigmoid(v)).collect();

        let mut recon = 0.0;
        let delta4: Vec<f64> = y
            .iter()
            .zip(x)
            .map(|(&yi, &xi)| {
                recon += (yi - xi) * (yi - xi);
                2.0 / d_out * (yi - xi) * yi * (1.0 - yi)
            })
            .collect();
        total_loss += recon / d_out + beta * kl_gaussian(&mu, &lv);

        // Output layer, then decoder hidden.
        net.layers[3].accumulate_grad(&mut grads.layers[3], &delta4, &a3);
        let mut delta3 = net.layers[3].backprop_delta(&delta4);
        relu_mask(&mut delta3, &p3);
        net.layers[2].accumulate_grad(&mut grads.layers[2], &delta3, &z);
        let dz = net.layers[2].backprop_delta(&delta3);

        // Split at the latent: mean path plus KL, log-variance path
        // through the reparameterization plus KL, gated by the clamp.
        let dmu: Vec<f64> = dz
            .iter()
            .zip(&mu)
            .map(|(&g, &m)| g + beta * m)
            .collect();
        let dlv: Vec<f64> = dz
            .iter()
            .zip(eta)
            .zip(&sd)
            .zip(&lv)
            .zip(&lv_raw)
            .map(|((((&g, &e), &s), &v), &raw)| {
                if raw < LOGVAR_CLAMP.0 || raw > LOGVAR_CLAMP.1 {
                    0.0
                } else {
                    g * e * s * 0.5 + beta * (-0.5) * (1.0 - v.exp())
                }
            })
            .collect();
        net.layers[1].accumulate_grad(&mut grads.layers[1], &dmu, &a1);
        head.layer.accumulate_grad(head_grad, &dlv, &a1);

        // Back into the shared encoder hidden layer.
        let mut delta1 = net.layers[1].backprop_delta(&dmu);
        let from_head = head.layer.backprop_delta(&dlv);
        for (d, h) in delta1.iter_mut().zip(&from_head) {
            *d += h;
        }
        relu_mask(&mut delta1, &p1);
        net.layers[0].accumulate_grad(&mut grads.layers[0], &delta1, x);
    }
    let n = xs.len().max(1) as f64;
    grads.scale(1.0 / n);
    for v in head_grad.w.iter_mut().chain(head_grad.b.iter_mut()) {
        *v /= n;
    }
    total_loss / n
}

struct Momentum {
    velocity: Vec<Layer>,
}

impl Momentum {
    fn zeros(layers: &[Layer]) -> Self {
        Self {
            velocity: layers.iter().map(Layer::zeros_like).collect(),
        }
    }

    fn step(&mut self, layers: &mut [Layer], grads: &[Layer], cfg: &TrainConfig) {
        for ((layer, vel), grad) in layers.iter_mut().zip(&mut self.velocity).zip(grads) {
            for ((w, v), g) in layer
                .w
                .iter_mut()
                .chain(layer.b.iter_mut())
                .zip(vel.w.iter_mut().chain(vel.b.iter_mut()))
                .zip(grad.w.iter().chain(grad.b.iter()))
            {
                *v = cfg.momentum * *v - cfg.learning_rate * *g;
                *w += *v;
            }
        }
    }
}

fn shuffled_indices(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx
}

fn mean_recon_loss(net: &DenseNetwork, data: &[Vec<f64>]) -> f64 {
    let mut grads = GradBuf::zeros(net);
    let pairs: Vec<(&[f64], &[f64])> =
        data.iter().map(|v| (v.as_slice(), v.as_slice())).collect();
    recon_batch(net, &pairs, &mut grads)
}

/// Trains the plain autoencoder: reconstruct each vector from itself.
pub fn train_ae(
    data: &[Vec<f64>],
    cfg: &TrainConfig,
) -> Result<(DenseNetwork, TrainStats), ModelError> {
    train_recon(data, cfg, None)
}

/// Trains the denoising autoencoder: corrupt each presentation with
/// fresh Gaussian noise (clamped back into [0,1]) and reconstruct the
/// clean vector.
pub fn train_dae(
    data: &[Vec<f64>],
    cfg: &TrainConfig,
    noise_sigma: f64,
) -> Result<(DenseNetwork, TrainStats), ModelError> {
    train_recon(data, cfg, Some(noise_sigma))
}

fn train_recon(
    data: &[Vec<f64>],
    cfg: &TrainConfig,
    noise_sigma: Option<f64>,
) -> Result<(DenseNetwork, TrainStats), ModelError> {
    let dim = validate_training_data(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = DenseNetwork::new(dim, false, &mut rng);
    let initial_loss = mean_recon_loss(&net, data);
    let mut momentum = Momentum::zeros(&net.layers);
    let mut final_loss = initial_loss;
    let batch = cfg.batch_size.max(1);
    for epoch in 0..cfg.epochs {
        let order = shuffled_indices(data.len(), &mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            // Corrupt per presentation so every epoch sees fresh noise.
            let corrupted: Option<Vec<Vec<f64>>> = noise_sigma.map(|sigma| {
                chunk
                    .iter()
                    .map(|&i| {
                        data[i]
                            .iter()
                            .map(|&v| {
                                let e: f64 = rng.sample(StandardNormal);
                                (v + sigma * e).clamp(0.0, 1.0)
                            })
                            .collect()
                    })
                    .collect()
            });
            let pairs: Vec<(&[f64], &[f64])> = chunk
                .iter()
                .enumerate()
                .map(|(j, &i)| {
                    let input = match &corrupted {
                        Some(c) => c[j].as_slice(),
                        None => data[i].as_slice(),
                    };
                    (input, data[i].as_slice())
                })
                .collect();
            let mut grads = GradBuf::zeros(&net);
            let loss = recon_batch(&net, &pairs, &mut grads);
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch, loss });
            }
            momentum.step(&mut net.layers, &grads.layers, cfg);
            epoch_loss += loss * chunk.len() as f64;
        }
        final_loss = epoch_loss / data.len() as f64;
    }
    Ok((
        net,
        TrainStats {
            initial_loss,
            final_loss,
        },
    ))
}

/// Trains the variational autoencoder with loss MSE + beta·KL.
pub fn train_vae(
    data: &[Vec<f64>],
    cfg: &TrainConfig,
    beta: f64,
) -> Result<(DenseNetwork, VaeHead, TrainStats), ModelError> {
    let dim = validate_training_data(data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = DenseNetwork::new(dim, true, &mut rng);
    let mut head = VaeHead::new(net.hidden_width(), net.latent_width(), &mut rng);
    let latent = net.latent_width();

    let initial_loss = {
        let mut grads = GradBuf::zeros(&net);
        let mut hg = head.layer.zeros_like();
        let etas: Vec<Vec<f64>> = data.iter().map(|_| vec![0.0; latent]).collect();
        vae_batch(&net, &head, data, &etas, beta, &mut grads, &mut hg)
    };

    let mut momentum = Momentum::zeros(&net.layers);
    let mut head_momentum = Momentum::zeros(std::slice::from_ref(&head.layer));
    let mut final_loss = initial_loss;
    let batch = cfg.batch_size.max(1);
    for epoch in 0..cfg.epochs {
        let order = shuffled_indices(data.len(), &mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let xs: Vec<Vec<f64>> = chunk.iter().map(|&i| data[i].clone()).collect();
            let etas: Vec<Vec<f64>> = chunk
                .iter()
                .map(|_| (0..latent).map(|_| rng.sample(StandardNormal)).collect())
                .collect();
            let mut grads = GradBuf::zeros(&net);
            let mut hg = head.layer.zeros_like();
            let loss = vae_batch(&net, &head, &xs, &etas, beta, &mut grads, &mut hg);
            if !loss.is_finite() {
                return Err(ModelError::NonFiniteLoss { epoch, loss });
            }
            momentum.step(&mut net.layers, &grads.layers, cfg);
            head_momentum.step(std::slice::from_mut(&mut head.layer), std::slice::from_ref(&hg), cfg);
            epoch_loss += loss * chunk.len() as f64;
        }
        final_loss = epoch_loss / data.len() as f64;
    }
    Ok((
        net,
        head,
        TrainStats {
            initial_loss,
            final_loss,
        },
    ))
}

/// Encoder-side mean and clamped log-variance for one input.
pub fn vae_encode(net: &DenseNetwork, head: &VaeHead, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut p1 = Vec::new();
    net.layers[0].affine(x, &mut p1);
    for v in p1.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let mut mu = Vec::new();
    net.layers[1].affine(&p1, &mut mu);
    let mut lv = Vec::new();
    head.layer.affine(&p1, &mut lv);
    for v in lv.iter_mut() {
        *v = v.clamp(LOGVAR_CLAMP.0, LOGVAR_CLAMP.1);
    }
    (mu, lv)
}

//! Gradient-based training through time.
//!
//! Both models are trained with softmax cross-entropy over max-over-time
//! readout potentials. For the delay network no spiking non-linearity sits on
//! the gradient path, so its gradient is exact; the recurrent baseline uses a
//! surrogate derivative for its hidden spikes. Noise-aware training evaluates
//! the forward pass on perturbed weights and applies the resulting gradient to
//! the clean weights.

use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{LabeledRasterSet, Sample};
use crate::dendrite::dendritic_current_sparse;
use crate::device::{apply_read_noise, NoiseModel};
use crate::error::{Error, Result};
use crate::network::{argmax_earliest, denram_forward, leaky_readout, single_output_offset, srnn_forward, DenramModel, Model, ReadoutMode, SrnnModel};
use crate::raster::SpikeRaster;

/// Pseudo-derivative used in place of the Heaviside step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Surrogate {
    FastSigmoid { slope: f64 },
    Boxcar { width: f64 },
}

impl Default for Surrogate {
    fn default() -> Self {
        Surrogate::FastSigmoid { slope: 10.0 }
    }
}

pub fn surrogate_derivative(v: f64, theta: f64, kind: Surrogate) -> f64 {
    let x = v - theta;
    match kind {
        Surrogate::FastSigmoid { slope } => {
            let d = 1.0 + slope * x.abs();
            1.0 / (d * d)
        }
        Surrogate::Boxcar { width } => {
            if x.abs() <= width / 2.0 {
                1.0 / width
            } else {
                0.0
            }
        }
    }
}

/// Smooth spike function whose derivative is exactly the surrogate.
fn relaxed_spike(v: f64, theta: f64, kind: Surrogate) -> f64 {
    let x = v - theta;
    0.5 + match kind {
        Surrogate::FastSigmoid { slope } => x / (1.0 + slope * x.abs()),
        Surrogate::Boxcar { width } => (x / width).clamp(-0.5, 0.5),
    }
}

/// Forward non-linearity of the hidden layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpikeMode {
    /// Binary spikes; the surrogate only shapes the backward pass.
    Heaviside,
    /// Spikes replaced by the surrogate's antiderivative, making the
    /// backward pass the exact gradient of the forward pass.
    Relaxed,
}

/// Update rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Optimizer {
    Sgd,
    AdaptiveMoments { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::AdaptiveMoments {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs_pretrain: usize,
    pub epochs_noise_aware: usize,
    pub surrogate: Surrogate,
    /// Weight noise applied during the noise-aware phase.
    pub noise: NoiseModel,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Noise draws averaged when scoring the validation split in the
    /// noise-aware phase.
    pub val_realizations: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs_pretrain: 20,
            epochs_noise_aware: 20,
            surrogate: Surrogate::default(),
            noise: NoiseModel::new(0.1, 0),
            seed: 0,
            optimizer: Optimizer::default(),
            val_realizations: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, path: &str) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("{path}.learning_rate"), "must be finite and > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::config(format!("{path}.batch_size"), "must be ≥ 1"));
        }
        if self.val_realizations == 0 {
            return Err(Error::config(format!("{path}.val_realizations"), "must be ≥ 1"));
        }
        match self.surrogate {
            Surrogate::FastSigmoid { slope } if !(slope > 0.0) => {
                return Err(Error::config(format!("{path}.surrogate.slope"), "must be > 0"));
            }
            Surrogate::Boxcar { width } if !(width > 0.0) => {
                return Err(Error::config(format!("{path}.surrogate.width"), "must be > 0"));
            }
            _ => {}
        }
        if let Optimizer::AdaptiveMoments { beta1, beta2, eps } = self.optimizer {
            if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0) {
                return Err(Error::config(
                    format!("{path}.optimizer"),
                    "need 0 ≤ β1, β2 < 1 and ε > 0",
                ));
            }
        }
        self.noise.validate(&format!("{path}.noise"))
    }
}

/// A model whose weight matrices can be trained by [`train`].
///
/// Delays and neuron constants are never part of the trainable set.
pub trait Trainable: Clone + Send + Sync {
    fn layers(&self) -> Vec<&Array2<f64>>;
    fn layers_mut(&mut self) -> Vec<&mut Array2<f64>>;
    fn n_classes(&self) -> usize;
    /// Logits used for prediction.
    fn logits(&self, r: &SpikeRaster) -> Result<Vec<f64>>;
    /// Cross-entropy loss of one sample and its gradient per layer.
    fn sample_gradient(&self, r: &SpikeRaster, label: usize, surrogate: Surrogate) -> Result<SampleGradient>;
}

#[derive(Debug, Clone)]
pub struct SampleGradient {
    pub loss: f64,
    pub grads: Vec<Array2<f64>>,
    pub correct: bool,
}

/// Softmax cross-entropy; returns (loss, d loss / d logits). A single logit
/// `z` is read as the log-odds of class 1 (binary cross-entropy).
pub fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    if let [z] = *logits {
        let y = if label == 1 { 1.0 } else { 0.0 };
        let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
        return (softplus - y * z, vec![1.0 / (1.0 + (-z).exp()) - y]);
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let loss = z.ln() + max - logits[label];
    let grad = exps
        .iter()
        .enumerate()
        .map(|(o, e)| e / z - if o == label { 1.0 } else { 0.0 })
        .collect();
    (loss, grad)
}

/// Index of the largest logit (lowest index on ties). A single logit is read
/// as a binary detector: class 1 iff it is positive.
pub fn predict(logits: &[f64]) -> usize {
    if logits.len() == 1 {
        return usize::from(logits[0] > 0.0);
    }
    let mut best = 0;
    for (o, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = o;
        }
    }
    best
}

fn check_label(label: usize, n_classes: usize) -> Result<()> {
    if label >= n_classes {
        return Err(Error::domain(format!(
            "label {label} out of range for {n_classes} classes"
        )));
    }
    Ok(())
}

impl Trainable for DenramModel {
    fn layers(&self) -> Vec<&Array2<f64>> {
        vec![&self.weights]
    }

    fn layers_mut(&mut self) -> Vec<&mut Array2<f64>> {
        vec![&mut self.weights]
    }

    fn n_classes(&self) -> usize {
        self.n_out().max(2)
    }

    fn logits(&self, r: &SpikeRaster) -> Result<Vec<f64>> {
        Ok(denram_forward(self, r)?.logits)
    }

    fn sample_gradient(&self, r: &SpikeRaster, label: usize, _surrogate: Surrogate) -> Result<SampleGradient> {
        if self.readout != ReadoutMode::MaxPotential {
            return Err(Error::config(
                "model.readout",
                "training requires the MaxPotential readout",
            ));
        }
        check_label(label, self.n_classes())?;
        let current = dendritic_current_sparse(r, &self.bank, &self.weights)?;
        let u = leaky_readout(&current, self.alpha_out)?;
        let peaks: Vec<(usize, f64)> = u.rows().into_iter().map(argmax_earliest).collect();
        let offset = single_output_offset(self);
        let logits: Vec<f64> = peaks.iter().map(|p| p.1 - offset).collect();
        let (loss, dlogits) = cross_entropy(&logits, label);

        // d u_o[t*] / d I_o[t] = alpha_out^(t* - t) for t ≤ t*.
        let steps = u.ncols();
        let mut powers = Vec::with_capacity(steps);
        let mut a = 1.0;
        for _ in 0..steps {
            powers.push(a);
            a *= self.alpha_out;
        }
        let bank = &self.bank;
        let mut grad = Array2::zeros(self.weights.dim());
        for i in 0..bank.n_channels() {
            let events = r.channel_events(i);
            if events.is_empty() {
                continue;
            }
            for j in 0..bank.n_delays() {
                let s = bank.shifts()[[i, j]];
                let c = bank.expanded_index(i, j);
                for &(t, n) in &events {
                    let t = t + s;
                    let n = f64::from(n);
                    for (o, &(t_star, _)) in peaks.iter().enumerate() {
                        if t <= t_star {
                            grad[[c, o]] += dlogits[o] * n * powers[t_star - t];
                        }
                    }
                }
            }
        }
        Ok(SampleGradient {
            loss,
            grads: vec![grad],
            correct: predict(&logits) == label,
        })
    }
}

/// Stored forward trajectory of the recurrent model.
struct SrnnTrace {
    /// `n_h × T`.
    v: Array2<f64>,
    s: Array2<f64>,
    /// 0 where a refractory period forced the spike to zero.
    mask: Array2<f64>,
    u: Array2<f64>,
}

fn srnn_trace(m: &SrnnModel, r: &SpikeRaster, mode: SpikeMode, surrogate: Surrogate) -> Result<SrnnTrace> {
    if r.n_channels() != m.n_in() {
        return Err(Error::domain(format!(
            "raster has {} channels, model expects {}",
            r.n_channels(),
            m.n_in()
        )));
    }
    let (n_h, steps) = (m.n_hidden(), r.n_steps());
    let p = &m.lif_hidden;
    let mut v = Array2::zeros((n_h, steps));
    let mut s = Array2::zeros((n_h, steps));
    let mut mask = Array2::ones((n_h, steps));
    let mut refractory = vec![0usize; n_h];
    let mut current = vec![0.0; n_h];
    for t in 0..steps {
        current.iter_mut().for_each(|c| *c = 0.0);
        for i in 0..m.n_in() {
            let x = r.get(i, t);
            if x > 0 {
                let x = f64::from(x);
                for (c, w) in current.iter_mut().zip(m.w_in.row(i)) {
                    *c += w * x;
                }
            }
        }
        if t > 0 {
            for k in 0..n_h {
                let sk = s[[k, t - 1]];
                if sk != 0.0 {
                    for (c, w) in current.iter_mut().zip(m.w_rec.row(k)) {
                        *c += w * sk;
                    }
                }
            }
        }
        for h in 0..n_h {
            let (v_prev, s_prev) = if t > 0 { (v[[h, t - 1]], s[[h, t - 1]]) } else { (0.0, 0.0) };
            let vt = p.alpha * v_prev * (1.0 - s_prev) + current[h];
            let st = if refractory[h] > 0 {
                refractory[h] -= 1;
                mask[[h, t]] = 0.0;
                0.0
            } else {
                match mode {
                    SpikeMode::Heaviside => {
                        if vt >= p.v_threshold {
                            refractory[h] = p.refractory_bins;
                            1.0
                        } else {
                            0.0
                        }
                    }
                    SpikeMode::Relaxed => relaxed_spike(vt, p.v_threshold, surrogate),
                }
            };
            v[[h, t]] = vt;
            s[[h, t]] = st;
        }
    }
    let u = leaky_readout(&m.w_out.t().dot(&s), m.alpha_out)?;
    Ok(SrnnTrace { v, s, mask, u })
}

/// Logits of the recurrent model under `mode`.
pub fn srnn_logits(m: &SrnnModel, r: &SpikeRaster, mode: SpikeMode, surrogate: Surrogate) -> Result<Vec<f64>> {
    let tr = srnn_trace(m, r, mode, surrogate)?;
    Ok(tr.u.rows().into_iter().map(|row| argmax_earliest(row).1).collect())
}

/// Loss and BPTT gradient `[d w_in, d w_rec, d w_out]` for one sample.
pub fn srnn_gradient(
    m: &SrnnModel,
    r: &SpikeRaster,
    label: usize,
    surrogate: Surrogate,
    mode: SpikeMode,
) -> Result<SampleGradient> {
    if m.n_out() < 2 {
        return Err(Error::config("model.n_out", "training needs at least two outputs"));
    }
    check_label(label, m.n_out())?;
    let tr = srnn_trace(m, r, mode, surrogate)?;
    let peaks: Vec<(usize, f64)> = tr.u.rows().into_iter().map(argmax_earliest).collect();
    let logits: Vec<f64> = peaks.iter().map(|p| p.1).collect();
    let (loss, dlogits) = cross_entropy(&logits, label);

    let (n_h, steps) = tr.v.dim();
    let n_out = m.n_out();
    let alpha = m.lif_hidden.alpha;
    let theta = m.lif_hidden.v_threshold;

    // Gradient w.r.t. the readout input current.
    let mut d_out = Array2::zeros((n_out, steps));
    for (o, &(t_star, _)) in peaks.iter().enumerate() {
        let mut g = dlogits[o];
        for t in (0..=t_star).rev() {
            d_out[[o, t]] = g;
            g *= m.alpha_out;
        }
    }

    let mut g_in = Array2::zeros(m.w_in.dim());
    let mut g_rec = Array2::zeros(m.w_rec.dim());
    let mut g_out = Array2::zeros(m.w_out.dim());
    let mut dv_next = vec![0.0; n_h];
    let mut ds = vec![0.0; n_h];
    let mut dv = vec![0.0; n_h];
    for t in (0..steps).rev() {
        for h in 0..n_h {
            let s_ht = tr.s[[h, t]];
            let mut acc = 0.0;
            for o in 0..n_out {
                let d = d_out[[o, t]];
                acc += m.w_out[[h, o]] * d;
                g_out[[h, o]] += s_ht * d;
            }
            ds[h] = acc;
        }
        if t + 1 < steps {
            for h in 0..n_h {
                let s_ht = tr.s[[h, t]];
                let mut acc = 0.0;
                for k in 0..n_h {
                    acc += m.w_rec[[h, k]] * dv_next[k];
                    g_rec[[h, k]] += s_ht * dv_next[k];
                }
                ds[h] += acc - dv_next[h] * alpha * tr.v[[h, t]];
                dv[h] = dv_next[h] * alpha * (1.0 - s_ht);
            }
        } else {
            dv.iter_mut().for_each(|d| *d = 0.0);
        }
        for h in 0..n_h {
            dv[h] += ds[h] * surrogate_derivative(tr.v[[h, t]], theta, surrogate) * tr.mask[[h, t]];
        }
        for i in 0..m.n_in() {
            let x = r.get(i, t);
            if x > 0 {
                let x = f64::from(x);
                for h in 0..n_h {
                    g_in[[i, h]] += x * dv[h];
                }
            }
        }
        std::mem::swap(&mut dv_next, &mut dv);
    }
    Ok(SampleGradient {
        loss,
        grads: vec![g_in, g_rec, g_out],
        correct: predict(&logits) == label,
    })
}

impl Trainable for SrnnModel {
    fn layers(&self) -> Vec<&Array2<f64>> {
        vec![&self.w_in, &self.w_rec, &self.w_out]
    }

    fn layers_mut(&mut self) -> Vec<&mut Array2<f64>> {
        vec![&mut self.w_in, &mut self.w_rec, &mut self.w_out]
    }

    fn n_classes(&self) -> usize {
        self.n_out().max(2)
    }

    fn logits(&self, r: &SpikeRaster) -> Result<Vec<f64>> {
        Ok(srnn_forward(self, r)?.logits)
    }

    fn sample_gradient(&self, r: &SpikeRaster, label: usize, surrogate: Surrogate) -> Result<SampleGradient> {
        srnn_gradient(self, r, label, surrogate, SpikeMode::Heaviside)
    }
}

impl Trainable for Model {
    fn layers(&self) -> Vec<&Array2<f64>> {
        match self {
            Model::Denram(m) => m.layers(),
            Model::Srnn(m) => m.layers(),
        }
    }

    fn layers_mut(&mut self) -> Vec<&mut Array2<f64>> {
        match self {
            Model::Denram(m) => m.layers_mut(),
            Model::Srnn(m) => m.layers_mut(),
        }
    }

    fn n_classes(&self) -> usize {
        self.n_out().max(2)
    }

    fn logits(&self, r: &SpikeRaster) -> Result<Vec<f64>> {
        Model::logits(self, r)
    }

    fn sample_gradient(&self, r: &SpikeRaster, label: usize, surrogate: Surrogate) -> Result<SampleGradient> {
        match self {
            Model::Denram(m) => m.sample_gradient(r, label, surrogate),
            Model::Srnn(m) => m.sample_gradient(r, label, surrogate),
        }
    }
}

/// Copy of `model` with every layer independently perturbed by `noise`.
pub fn perturbed<M: Trainable, R: Rng + ?Sized>(model: &M, noise: &NoiseModel, rng: &mut R) -> M {
    let mut out = model.clone();
    for (dst, src) in out.layers_mut().into_iter().zip(model.layers()) {
        *dst = apply_read_noise(src, noise, rng);
    }
    out
}

/// Mean loss and gradient over a batch.
#[derive(Debug, Clone)]
pub struct BatchGradient {
    pub loss: f64,
    pub grads: Vec<Array2<f64>>,
    pub correct: usize,
}

/// Batch loss and gradients with respect to the clean weights.
///
/// With `noise`, the forward and backward passes run on a perturbed copy of
/// the weights and the resulting gradient is returned unchanged
/// (straight-through).
pub fn loss_and_grads<M: Trainable, R: Rng + ?Sized>(
    model: &M,
    batch: &[Sample],
    noise: Option<&NoiseModel>,
    surrogate: Surrogate,
    rng: &mut R,
) -> Result<BatchGradient> {
    match noise {
        Some(n) if !n.is_silent() => loss_and_grads_with(model, batch, surrogate, |m| perturbed(m, n, rng)),
        _ => batch_gradient(model, batch, surrogate),
    }
}

/// Straight-through gradient under an arbitrary weight perturbation.
pub fn loss_and_grads_with<M: Trainable>(
    model: &M,
    batch: &[Sample],
    surrogate: Surrogate,
    perturb: impl FnOnce(&M) -> M,
) -> Result<BatchGradient> {
    batch_gradient(&perturb(model), batch, surrogate)
}

/// Gradient of the batch-mean loss evaluated at `model`'s own weights.
pub fn batch_gradient<M: Trainable>(model: &M, batch: &[Sample], surrogate: Surrogate) -> Result<BatchGradient> {
    if batch.is_empty() {
        return Err(Error::domain("empty batch"));
    }
    let per_sample: Vec<SampleGradient> = batch
        .par_iter()
        .map(|s| model.sample_gradient(&s.raster, s.label, surrogate))
        .collect::<Result<_>>()?;
    let scale = 1.0 / batch.len() as f64;
    let mut grads: Vec<Array2<f64>> = model.layers().iter().map(|l| Array2::zeros(l.dim())).collect();
    let mut loss = 0.0;
    let mut correct = 0;
    // Ordered reduction keeps results independent of thread scheduling.
    for g in &per_sample {
        loss += g.loss;
        correct += usize::from(g.correct);
        for (acc, gi) in grads.iter_mut().zip(&g.grads) {
            *acc += gi;
        }
    }
    for g in &mut grads {
        *g *= scale;
    }
    Ok(BatchGradient {
        loss: loss * scale,
        grads,
        correct,
    })
}

struct OptimizerState {
    kind: Optimizer,
    lr: f64,
    step: i32,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl OptimizerState {
    fn new<M: Trainable>(kind: Optimizer, lr: f64, model: &M) -> Self {
        let zeros = || model.layers().iter().map(|l| Array2::zeros(l.dim())).collect();
        OptimizerState {
            kind,
            lr,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    fn apply<M: Trainable>(&mut self, model: &mut M, grads: &[Array2<f64>]) {
        self.step += 1;
        let lr = self.lr;
        match self.kind {
            Optimizer::Sgd => {
                for (w, g) in model.layers_mut().into_iter().zip(grads) {
                    w.scaled_add(-lr, g);
                }
            }
            Optimizer::AdaptiveMoments { beta1, beta2, eps } => {
                let c1 = 1.0 - beta1.powi(self.step);
                let c2 = 1.0 - beta2.powi(self.step);
                for (((w, g), m), v) in model
                    .layers_mut()
                    .into_iter()
                    .zip(grads)
                    .zip(&mut self.m)
                    .zip(&mut self.v)
                {
                    ndarray::Zip::from(w).and(g).and(m).and(v).for_each(|w, &g, m, v| {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    });
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pretrain,
    NoiseAware,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: Phase,
    pub loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
    /// Seed of the weight-noise stream used in this epoch.
    pub noise_seed: Option<u64>,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were returned (1-based), if any training happened.
    pub best_epoch: Option<usize>,
}

impl TrainHistory {
    /// `epoch,loss,train_acc,val_acc,seed`; wall-clock is left out so the file
    /// is reproducible.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,train_acc,val_acc,seed\n");
        for e in &self.epochs {
            let seed = e.noise_seed.map(|s| s.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{},{}\n", e.epoch, e.loss, e.train_acc, e.val_acc, seed));
        }
        out
    }

    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }
}

fn noise_stream_seed(base: u64, epoch: usize) -> u64 {
    base ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Two-phase training: noise-free pretraining, then noise-aware fine-tuning
/// with a fresh weight-noise draw for every batch.
///
/// The returned model is the best-validation checkpoint of the last phase
/// that ran. In the noise-aware phase validation accuracy is the mean over
/// `val_realizations` fixed noise draws.
pub fn train<M: Trainable>(
    model: M,
    train_set: &LabeledRasterSet,
    val_set: &LabeledRasterSet,
    cfg: &TrainConfig,
) -> Result<(M, TrainHistory)> {
    cfg.validate("train")?;
    if train_set.is_empty() {
        return Err(Error::config("data.train", "training set is empty"));
    }
    for s in train_set.samples.iter().chain(&val_set.samples) {
        check_label(s.label, model.n_classes())?;
    }
    let mut history = TrainHistory::default();
    if cfg.epochs_pretrain + cfg.epochs_noise_aware == 0 {
        return Ok((model, history));
    }

    let mut model = model;
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate, &model);
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let selection_set = if val_set.is_empty() { train_set } else { val_set };
    let mut best: Option<(f64, M, usize)> = None;

    let phases = [
        (Phase::Pretrain, cfg.epochs_pretrain, None),
        (Phase::NoiseAware, cfg.epochs_noise_aware, Some(cfg.noise)),
    ];
    let mut epoch = 0;
    for (phase, n_epochs, noise) in phases {
        if n_epochs == 0 {
            continue;
        }
        best = None;
        for _ in 0..n_epochs {
            epoch += 1;
            let started = Instant::now();
            order.shuffle(&mut order_rng);
            let noise_seed = noise.map(|n| noise_stream_seed(n.seed, epoch));
            let mut noise_rng = ChaCha8Rng::seed_from_u64(noise_seed.unwrap_or(0));
            let mut loss_sum = 0.0;
            let mut correct = 0;
            for chunk in order.chunks(cfg.batch_size) {
                let batch: Vec<Sample> = chunk.iter().map(|&i| train_set.samples[i].clone()).collect();
                let g = loss_and_grads(&model, &batch, noise.as_ref(), cfg.surrogate, &mut noise_rng)?;
                loss_sum += g.loss * batch.len() as f64;
                correct += g.correct;
                opt.apply(&mut model, &g.grads);
            }
            let val_acc = match noise {
                Some(n) if !n.is_silent() => {
                    let mut rng = ChaCha8Rng::seed_from_u64(noise_stream_seed(n.seed, 0));
                    evaluate(&model, selection_set, &n, cfg.val_realizations, &mut rng)?.mean_accuracy
                }
                _ => accuracy(&model, selection_set)?,
            };
            let n = train_set.len() as f64;
            history.epochs.push(EpochRecord {
                epoch,
                phase,
                loss: loss_sum / n,
                train_acc: correct as f64 / n,
                val_acc,
                noise_seed,
                wall_clock_s: started.elapsed().as_secs_f64(),
            });
            log::debug!("epoch {epoch} ({phase:?}): loss {:.4} val {:.4}", loss_sum / n, val_acc);
            if best.as_ref().is_none_or(|b| val_acc >= b.0) {
                best = Some((val_acc, model.clone(), epoch));
            }
        }
    }
    let (_, best_model, best_epoch) = best.expect("at least one epoch ran");
    history.best_epoch = Some(best_epoch);
    Ok((best_model, history))
}

fn predictions<M: Trainable>(model: &M, set: &LabeledRasterSet) -> Result<Vec<usize>> {
    set.samples
        .par_iter()
        .map(|s| model.logits(&s.raster).map(|l| predict(&l)))
        .collect()
}

/// Noise-free accuracy.
pub fn accuracy<M: Trainable>(model: &M, set: &LabeledRasterSet) -> Result<f64> {
    if set.is_empty() {
        return Ok(0.0);
    }
    let preds = predictions(model, set)?;
    let correct = preds.iter().zip(&set.samples).filter(|(p, s)| **p == s.label).count();
    Ok(correct as f64 / set.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_accuracy: f64,
    /// Population std over realizations.
    pub std_accuracy: f64,
    /// Mean accuracy per class over realizations; `None` for absent classes.
    pub per_class: Vec<Option<f64>>,
    pub accuracies: Vec<f64>,
}

/// Accuracy under `n_realizations` independent weight-noise draws.
pub fn evaluate<M: Trainable, R: Rng + ?Sized>(
    model: &M,
    test: &LabeledRasterSet,
    noise: &NoiseModel,
    n_realizations: usize,
    rng: &mut R,
) -> Result<EvalReport> {
    if n_realizations == 0 {
        return Err(Error::domain("need at least one noise realization"));
    }
    let k = model.n_classes().max(test.n_classes);
    let mut class_totals = vec![0usize; k];
    for s in &test.samples {
        if s.label < k {
            class_totals[s.label] += 1;
        }
    }
    let mut class_correct = vec![0usize; k];
    let mut accuracies = Vec::with_capacity(n_realizations);
    let single_pass = noise.is_silent();
    let mut cached: Option<Vec<usize>> = None;
    for _ in 0..n_realizations {
        let preds = if single_pass {
            match &cached {
                Some(p) => p.clone(),
                None => {
                    let p = predictions(model, test)?;
                    cached = Some(p.clone());
                    p
                }
            }
        } else {
            predictions(&perturbed(model, noise, rng), test)?
        };
        let mut correct = 0;
        for (p, s) in preds.iter().zip(&test.samples) {
            if *p == s.label {
                correct += 1;
                class_correct[s.label] += 1;
            }
        }
        accuracies.push(if test.is_empty() { 0.0 } else { correct as f64 / test.len() as f64 });
    }
    let n = accuracies.len() as f64;
    let mean = accuracies.iter().sum::<f64>() / n;
    let std = (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    let per_class = class_totals
        .iter()
        .zip(&class_correct)
        .map(|(&tot, &c)| (tot > 0).then(|| c as f64 / (tot as f64 * n)))
        .collect();
    Ok(EvalReport {
        mean_accuracy: mean,
        std_accuracy: std,
        per_class,
        accuracies,
    })
}

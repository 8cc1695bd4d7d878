//! Per-layer linear probes: softmax regression trained with Adam.
//!
//! Embeddings are stored as `f32`; every reduction here accumulates in `f64`.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("empty batch")]
    EmptyBatch,
    #[error("class {0} has no training samples")]
    EmptyClass(usize),
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("malformed probe file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = ProbeError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    /// Minimum per-epoch improvement of the full-pass training loss.
    pub plateau_tolerance: f64,
    /// Consecutive sub-tolerance epochs before stopping.
    pub plateau_patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 16,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 200,
            plateau_tolerance: 1e-5,
            plateau_patience: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(ProbeError::InvalidConfig(msg.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return bad("beta1 must be in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return bad("beta2 must be in [0, 1)");
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad("epsilon must be > 0");
        }
        if self.plateau_tolerance < 0.0 || self.plateau_tolerance.is_nan() {
            return bad("plateau_tolerance must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub epochs_run: usize,
    pub final_train_loss: f64,
    pub seed: u64,
    /// True when the plateau rule fired before `max_epochs`.
    pub converged: bool,
}

/// A linear classifier `x -> argmax(W x + b)` for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProbe {
    pub layer: u32,
    /// `num_classes x hidden_dim`
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub train_meta: TrainMeta,
}

impl LinearProbe {
    pub fn zeros(layer: u32, num_classes: usize, hidden_dim: usize) -> Self {
        Self {
            layer,
            weights: Array2::zeros((num_classes, hidden_dim)),
            bias: Array1::zeros(num_classes),
            train_meta: TrainMeta {
                epochs_run: 0,
                final_train_loss: (num_classes as f64).ln(),
                seed: 0,
                converged: false,
            },
        }
    }

    pub fn num_classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn logits<T: Copy + Into<f64>>(&self, x: &[T]) -> Result<Vec<f64>> {
        check_dim("embedding", self.hidden_dim(), x.len())?;
        Ok(self
            .weights
            .rows()
            .into_iter()
            .zip(self.bias.iter())
            .map(|(w, &b)| b + w.iter().zip(x).map(|(&w, &x)| w * x.into()).sum::<f64>())
            .collect())
    }

    /// Argmax class; ties go to the smallest index.
    pub fn predict<T: Copy + Into<f64>>(&self, x: &[T]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(ProbeError::DimensionMismatch {
            what,
            expected,
            found,
        });
    }
    Ok(())
}

fn check_finite(what: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(ProbeError::NonFinite(what))
    }
}

/// `log(sum(exp(z)))`, max-shifted.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    check_finite("logits", logits)?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// `-log softmax(logits)[label]`, via log-sum-exp.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<f64> {
    check_finite("logits", logits)?;
    if label >= logits.len() {
        return Err(ProbeError::LabelOutOfRange {
            label,
            num_classes: logits.len(),
        });
    }
    // Clamp the tiny negative values rounding can produce.
    Ok((log_sum_exp(logits) - logits[label]).max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Accumulates loss and gradients for the selected rows into flat buffers
/// (`grad_w` row-major `n x d`). Returns the summed loss; callers scale.
#[allow(clippy::too_many_arguments)]
fn accumulate<T: Copy + Into<f64>>(
    w: &[f64],
    b: &[f64],
    x: ArrayView2<'_, T>,
    rows: &[usize],
    labels: &[usize],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    scratch: &mut Vec<f64>,
) -> f64 {
    let (n, d) = (b.len(), x.ncols());
    let mut row_buf = vec![0.0f64; d];
    let mut loss = 0.0;
    for &r in rows {
        for (dst, &src) in row_buf.iter_mut().zip(x.row(r).iter()) {
            *dst = src.into();
        }
        scratch.clear();
        scratch.extend((0..n).map(|k| {
            b[k] + w[k * d..(k + 1) * d]
                .iter()
                .zip(&row_buf)
                .map(|(w, x)| w * x)
                .sum::<f64>()
        }));
        let lse = log_sum_exp(scratch);
        let y = labels[r];
        loss += lse - scratch[y];
        for k in 0..n {
            let resid = (scratch[k] - lse).exp() - if k == y { 1.0 } else { 0.0 };
            grad_b[k] += resid;
            for (g, x) in grad_w[k * d..(k + 1) * d].iter_mut().zip(&row_buf) {
                *g += resid * x;
            }
        }
    }
    loss
}

/// Mean cross-entropy over a batch and its exact gradient.
pub fn batch_loss_and_grad<T: Copy + Into<f64>>(
    probe: &LinearProbe,
    x: ArrayView2<'_, T>,
    labels: &[usize],
) -> Result<(f64, Gradients)> {
    let (n, d) = probe.weights.dim();
    if x.nrows() == 0 {
        return Err(ProbeError::EmptyBatch);
    }
    check_dim("batch features", d, x.ncols())?;
    check_dim("batch labels", x.nrows(), labels.len())?;
    if let Some(&label) = labels.iter().find(|&&y| y >= n) {
        return Err(ProbeError::LabelOutOfRange {
            label,
            num_classes: n,
        });
    }
    let w = probe.weights.as_standard_layout();
    let mut grad_w = vec![0.0; n * d];
    let mut grad_b = vec![0.0; n];
    let rows: Vec<usize> = (0..x.nrows()).collect();
    let total = accumulate(
        w.as_slice().expect("standard layout"),
        probe.bias.as_slice().expect("contiguous bias"),
        x,
        &rows,
        labels,
        &mut grad_w,
        &mut grad_b,
        &mut Vec::with_capacity(n),
    );
    let scale = 1.0 / x.nrows() as f64;
    grad_w.iter_mut().for_each(|g| *g *= scale);
    grad_b.iter_mut().for_each(|g| *g *= scale);
    Ok((
        total * scale,
        Gradients {
            weights: Array2::from_shape_vec((n, d), grad_w).expect("n*d gradient"),
            bias: Array1::from_vec(grad_b),
        },
    ))
}

/// Adam moments for a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            first_moment: vec![0.0; len],
            second_moment: vec![0.0; len],
            step_count: 0,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    check_dim("adam gradient", params.len(), grads.len())?;
    check_dim("adam state", params.len(), state.first_moment.len())?;
    check_dim("adam state", params.len(), state.second_moment.len())?;
    check_finite("gradient", grads)?;
    state.step_count += 1;
    let t = state.step_count as i32;
    let bias1 = 1.0 - cfg.beta1.powi(t);
    let bias2 = 1.0 - cfg.beta2.powi(t);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

/// Trains a zero-initialized probe with minibatch Adam until the training
/// loss plateaus or `max_epochs` is reached.
pub fn train_probe<T: Copy + Into<f64>>(
    layer: u32,
    x: ArrayView2<'_, T>,
    labels: &[usize],
    num_classes: usize,
    cfg: &TrainConfig,
) -> Result<LinearProbe> {
    cfg.validate()?;
    check_dim("training labels", x.nrows(), labels.len())?;
    let d = x.ncols();
    let n = num_classes;
    let mut counts = vec![0usize; n];
    for &y in labels {
        if y >= n {
            return Err(ProbeError::LabelOutOfRange {
                label: y,
                num_classes: n,
            });
        }
        counts[y] += 1;
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(ProbeError::EmptyClass(empty));
    }
    if x.iter().any(|&v| !v.into().is_finite()) {
        return Err(ProbeError::NonFinite("training data"));
    }

    let n_w = n * d;
    let mut params = vec![0.0f64; n_w + n];
    let mut grads = vec![0.0f64; n_w + n];
    let mut state = AdamState::new(params.len());
    let mut scratch = Vec::with_capacity(n);
    let mut rng = rng::seeded(cfg.seed);
    let mut order: Vec<usize> = (0..x.nrows()).collect();

    let full_loss = |params: &[f64], scratch: &mut Vec<f64>| {
        let (w, b) = params.split_at(n_w);
        let mut gw = vec![0.0; n_w];
        let mut gb = vec![0.0; n];
        let rows: Vec<usize> = (0..x.nrows()).collect();
        accumulate(w, b, x, &rows, labels, &mut gw, &mut gb, scratch) / x.nrows() as f64
    };

    let mut prev_loss = full_loss(&params, &mut scratch);
    let mut stalled = 0;
    let mut epochs_run = 0;
    let mut converged = false;
    for _ in 0..cfg.max_epochs {
        rng::shuffle(&mut order, &mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grads.iter_mut().for_each(|g| *g = 0.0);
            let (w, b) = params.split_at(n_w);
            let (gw, gb) = grads.split_at_mut(n_w);
            accumulate(w, b, x, batch, labels, gw, gb, &mut scratch);
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            adam_step(&mut params, &grads, &mut state, cfg)?;
        }
        epochs_run += 1;
        let loss = full_loss(&params, &mut scratch);
        if prev_loss - loss < cfg.plateau_tolerance {
            stalled += 1;
        } else {
            stalled = 0;
        }
        prev_loss = loss;
        if stalled >= cfg.plateau_patience {
            converged = true;
            break;
        }
    }

    let bias = params.split_off(n_w);
    Ok(LinearProbe {
        layer,
        weights: Array2::from_shape_vec((n, d), params).expect("n*d weights"),
        bias: Array1::from_vec(bias),
        train_meta: TrainMeta {
            epochs_run,
            final_train_loss: prev_loss,
            seed: cfg.seed,
            converged,
        },
    })
}

pub fn predict<T: Copy + Into<f64>>(probe: &LinearProbe, x: &[T]) -> Result<usize> {
    probe.predict(x)
}

pub const PROBE_MAGIC: &[u8; 8] = b"LWPPROBE";

#[derive(Debug, Serialize, Deserialize)]
struct ProbeFileMeta {
    layer: u32,
    num_classes: usize,
    hidden_dim: usize,
    train_meta: TrainMeta,
}

/// Writes the probe sidecar: magic, u64 JSON length, JSON metadata, zero
/// padding to 8 bytes, then `W` (row-major) and `b` as little-endian f64.
pub fn write_probe<W: Write>(writer: W, probe: &LinearProbe) -> Result<()> {
    let meta = ProbeFileMeta {
        layer: probe.layer,
        num_classes: probe.num_classes(),
        hidden_dim: probe.hidden_dim(),
        train_meta: probe.train_meta.clone(),
    };
    let json = serde_json::to_vec(&meta).map_err(io::Error::other)?;
    let mut w = BufWriter::new(writer);
    w.write_all(PROBE_MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    let pad = (8 - (16 + json.len()) % 8) % 8;
    w.write_all(&[0u8; 8][..pad])?;
    for v in probe.weights.iter().chain(probe.bias.iter()) {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_probe<R: Read>(reader: R) -> Result<LinearProbe> {
    let mut r = BufReader::new(reader);
    let malformed = |msg: &str| ProbeError::Malformed(msg.to_string());
    let mut head = [0u8; 16];
    r.read_exact(&mut head)
        .map_err(|_| malformed("truncated preamble"))?;
    if &head[..8] != PROBE_MAGIC {
        return Err(malformed("bad magic"));
    }
    let len = u64::from_le_bytes(head[8..].try_into().expect("8 bytes")) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)
        .map_err(|_| malformed("truncated metadata"))?;
    let meta: ProbeFileMeta =
        serde_json::from_slice(&json).map_err(|e| ProbeError::Malformed(e.to_string()))?;
    let pad = (8 - (16 + len) % 8) % 8;
    r.read_exact(&mut [0u8; 8][..pad])
        .map_err(|_| malformed("truncated padding"))?;
    let (n, d) = (meta.num_classes, meta.hidden_dim);
    let mut values = vec![0.0f64; n * d + n];
    let mut buf = [0u8; 8];
    for v in values.iter_mut() {
        r.read_exact(&mut buf)
            .map_err(|_| malformed("truncated parameters"))?;
        *v = f64::from_le_bytes(buf);
    }
    let bias = values.split_off(n * d);
    Ok(LinearProbe {
        layer: meta.layer,
        weights: Array2::from_shape_vec((n, d), values).expect("n*d weights"),
        bias: Array1::from_vec(bias),
        train_meta: meta.train_meta,
    })
}

pub fn save_probe(path: impl AsRef<Path>, probe: &LinearProbe) -> Result<()> {
    write_probe(File::create(path)?, probe)
}

pub fn load_probe(path: impl AsRef<Path>) -> Result<LinearProbe> {
    read_probe(File::open(path)?)
}

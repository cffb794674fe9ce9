//! From-scratch differentiable classifier: a softmax head over optional
//! rectified-linear hidden layers, trained with mini-batch SGD.
//!
//! Parameters live in `f64`; feature rows stay `f32` and are widened at the
//! point of use. Everything is deterministic given (data, config, seed).

mod eval;
mod gradcheck;
mod train;

pub use eval::{evaluate_indexed, evaluate_on_view, ConfusionMatrix};
pub use gradcheck::grad_check;
pub use train::{train_sgd, EpochStats, TrainHistory, TrainSet};

#[cfg(test)]
pub(crate) use train::batch_gradients;

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::rng_from_seed;

/// Optimizer settings; defaults follow the reference training recipe
/// (mini-batches of 24, lr 0.01, momentum 0.9, weight decay 1e-4).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Multiplier applied to the learning rate at each curriculum transition.
    pub lr_transition_factor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 1e-4,
            batch_size: 24,
            epochs: 10,
            seed: 7,
            lr_transition_factor: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0
            || !(0.0..1.0).contains(&self.momentum)
            || self.weight_decay < 0.0
            || self.batch_size == 0
        {
            return Err(Error::InvalidShape(format!(
                "bad train config: lr {}, momentum {}, weight decay {}, batch {}",
                self.learning_rate, self.momentum, self.weight_decay, self.batch_size
            )));
        }
        Ok(())
    }
}

/// Fully connected layer, weights stored input-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `weights[i * out_dim + j]` connects input `i` to output `j`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    /// Zero-mean uniform init scaled by fan-in; zero biases.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut impl Rng) -> Self {
        let scale = 1.0 / (in_dim as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-scale..scale))
            .collect();
        Self {
            in_dim,
            out_dim,
            weights,
            biases: vec![0.0; out_dim],
        }
    }

    pub fn zeroed(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
        }
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    /// `out[b] = x[b] * W + bias` for a batch of widened rows.
    fn affine(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        xs.iter()
            .map(|x| {
                let mut out = self.biases.clone();
                for (i, &xi) in x.iter().enumerate() {
                    let row = &self.weights[i * self.out_dim..(i + 1) * self.out_dim];
                    for (o, &w) in out.iter_mut().zip(row) {
                        *o += xi * w;
                    }
                }
                out
            })
            .collect()
    }
}

/// Softmax classifier with optional hidden layers and a named label space.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    pub input_dim: usize,
    pub hidden: Vec<DenseLayer>,
    pub head: DenseLayer,
    pub classes: Vec<String>,
    /// Hierarchy level of `classes` when they come from a taxonomy.
    pub level: Option<u8>,
    /// Free-text audit trail of the seeds that shaped this model.
    pub lineage: String,
}

/// Build a model with fan-in-scaled uniform weights and zero biases.
pub fn init_model(
    input_dim: usize,
    hidden_dims: &[usize],
    classes: &[String],
    seed: u64,
) -> Result<ProbeModel> {
    if input_dim == 0 {
        return Err(Error::InvalidShape("input dimension must be positive".into()));
    }
    if classes.is_empty() {
        return Err(Error::InvalidShape("class list must be nonempty".into()));
    }
    if hidden_dims.contains(&0) {
        return Err(Error::InvalidShape("hidden widths must be positive".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut hidden = Vec::with_capacity(hidden_dims.len());
    let mut prev = input_dim;
    for &width in hidden_dims {
        hidden.push(DenseLayer::init(prev, width, &mut rng));
        prev = width;
    }
    let head = DenseLayer::init(prev, classes.len(), &mut rng);
    Ok(ProbeModel {
        input_dim,
        hidden,
        head,
        classes: classes.to_vec(),
        level: None,
        lineage: format!("init:{seed}"),
    })
}

impl ProbeModel {
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn hidden_dims(&self) -> Vec<usize> {
        self.hidden.iter().map(|l| l.out_dim).collect()
    }

    pub fn num_params(&self) -> usize {
        self.hidden.iter().map(DenseLayer::num_params).sum::<usize>() + self.head.num_params()
    }

    fn widen(&self, xs: &[&[f32]]) -> Result<Vec<Vec<f64>>> {
        for x in xs {
            if x.len() != self.input_dim {
                return Err(Error::DimMismatch {
                    expected: self.input_dim,
                    got: x.len(),
                    context: "input width".into(),
                });
            }
        }
        Ok(xs
            .iter()
            .map(|x| x.iter().map(|&v| f64::from(v)).collect())
            .collect())
    }

    /// Forward pass keeping every post-activation, for backprop.
    pub(crate) fn forward_trace(&self, xs: &[&[f32]]) -> Result<ForwardTrace> {
        let mut acts = vec![self.widen(xs)?];
        for layer in &self.hidden {
            let mut a = layer.affine(acts.last().unwrap());
            for row in &mut a {
                for v in row.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            acts.push(a);
        }
        let logits = self.head.affine(acts.last().unwrap());
        let probs = logits.iter().map(|row| softmax(row)).collect();
        Ok(ForwardTrace { acts, probs })
    }

    /// Class probabilities for a batch; rows are nonnegative and sum to one.
    pub fn forward(&self, xs: &[&[f32]]) -> Result<Vec<Vec<f64>>> {
        Ok(self.forward_trace(xs)?.probs)
    }

    /// Argmax predictions with confidences; ties break to the lowest index.
    pub fn predict(&self, xs: &[&[f32]]) -> Result<(Vec<usize>, Vec<f64>)> {
        let probs = self.forward(xs)?;
        let mut labels = Vec::with_capacity(probs.len());
        let mut confidences = Vec::with_capacity(probs.len());
        for row in &probs {
            let k = argmax(row);
            labels.push(k);
            confidences.push(row[k]);
        }
        Ok((labels, confidences))
    }

    /// Write a checkpoint: JSON header plus a little-endian `f64` payload
    /// next to it. Round-trips bit-exactly.
    pub fn save(&self, header_path: impl AsRef<Path>) -> Result<()> {
        let header_path = header_path.as_ref();
        let header = CheckpointHeader {
            input_dim: self.input_dim,
            hidden_dims: self.hidden_dims(),
            classes: self.classes.clone(),
            level: self.level,
            lineage: self.lineage.clone(),
            dtype: "f64".into(),
        };
        std::fs::write(header_path, serde_json::to_string_pretty(&header)? + "\n")?;
        let mut out =
            std::io::BufWriter::new(std::fs::File::create(payload_path(header_path))?);
        for layer in self.hidden.iter().chain(std::iter::once(&self.head)) {
            for v in layer.weights.iter().chain(&layer.biases) {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn load(header_path: impl AsRef<Path>) -> Result<Self> {
        let header_path = header_path.as_ref();
        let header: CheckpointHeader =
            serde_json::from_str(&std::fs::read_to_string(header_path)?)?;
        if header.dtype != "f64" {
            return Err(Error::Parse {
                line: None,
                msg: format!("unsupported checkpoint dtype `{}`", header.dtype),
            });
        }
        let mut payload = Vec::new();
        std::fs::File::open(payload_path(header_path))?.read_to_end(&mut payload)?;
        let mut values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));

        let mut take_layer = |in_dim: usize, out_dim: usize| -> Result<DenseLayer> {
            let mut layer = DenseLayer::zeroed(in_dim, out_dim);
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *w = values.next().ok_or(Error::Parse {
                    line: None,
                    msg: "checkpoint payload truncated".into(),
                })?;
            }
            Ok(layer)
        };

        let mut hidden = Vec::new();
        let mut prev = header.input_dim;
        for &width in &header.hidden_dims {
            hidden.push(take_layer(prev, width)?);
            prev = width;
        }
        let head = take_layer(prev, header.classes.len())?;
        if values.next().is_some() {
            return Err(Error::Parse {
                line: None,
                msg: "checkpoint payload has trailing data".into(),
            });
        }
        Ok(ProbeModel {
            input_dim: header.input_dim,
            hidden,
            head,
            classes: header.classes,
            level: header.level,
            lineage: header.lineage,
        })
    }
}

fn payload_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("bin")
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    input_dim: usize,
    hidden_dims: Vec<usize>,
    classes: Vec<String>,
    level: Option<u8>,
    lineage: String,
    dtype: String,
}

pub(crate) struct ForwardTrace {
    /// `acts[0]` is the widened input; `acts[l]` the post-ReLU output of
    /// hidden layer `l - 1`.
    pub acts: Vec<Vec<Vec<f64>>>,
    pub probs: Vec<Vec<f64>>,
}

/// Numerically safe softmax (max subtraction before exponentiation).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Index of the strictly largest entry; ties break to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::corpus::CorpusView;
use crate::error::{Error, Result};
use crate::hierarchy::EmotionHierarchy;
use crate::seeding::rng_from_seed;

use super::{DenseLayer, ForwardTrace, ProbeModel, TrainConfig};

/// Feature rows with class indices into a model's label space.
#[derive(Debug, Clone)]
pub struct TrainSet<'a> {
    pub features: Vec<&'a [f32]>,
    pub targets: Vec<usize>,
}

impl<'a> TrainSet<'a> {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Resolve each record's label at `level` and index it into `classes`.
    pub fn from_view_level(
        view: &CorpusView<'a>,
        level: u8,
        hierarchy: &EmotionHierarchy,
        classes: &[String],
    ) -> Result<Self> {
        let mut features = Vec::with_capacity(view.len());
        let mut targets = Vec::with_capacity(view.len());
        for i in 0..view.len() {
            let label = view.record(i).label_at(level, hierarchy)?;
            let target = classes
                .iter()
                .position(|c| *c == label.name)
                .ok_or(Error::UnknownLabel {
                    label: label.name.clone(),
                    level,
                })?;
            features.push(view.feature(i));
            targets.push(target);
        }
        Ok(Self { features, targets })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
}

/// Per-epoch loss/accuracy trace for one training run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct TrainHistory {
    pub learning_rate: f64,
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_loss)
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_accuracy)
    }

    /// `epoch,loss,accuracy` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,accuracy\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{}\n", e.epoch, e.mean_loss, e.train_accuracy));
        }
        out
    }
}

pub(crate) struct Gradients {
    pub layers: Vec<DenseLayer>,
}

impl Gradients {
    fn zeroed_like(model: &ProbeModel) -> Self {
        let layers = model
            .hidden
            .iter()
            .chain(std::iter::once(&model.head))
            .map(|l| DenseLayer::zeroed(l.in_dim, l.out_dim))
            .collect();
        Self { layers }
    }
}

/// Mean cross-entropy over the batch plus `weight_decay/2 * ||W||^2`
/// (weight matrices only; biases are not decayed).
pub(crate) fn batch_loss(
    model: &ProbeModel,
    features: &[&[f32]],
    targets: &[usize],
    weight_decay: f64,
) -> Result<f64> {
    let trace = model.forward_trace(features)?;
    Ok(loss_from_trace(model, &trace, targets, weight_decay))
}

fn loss_from_trace(
    model: &ProbeModel,
    trace: &ForwardTrace,
    targets: &[usize],
    weight_decay: f64,
) -> f64 {
    let m = targets.len() as f64;
    let ce: f64 = trace
        .probs
        .iter()
        .zip(targets)
        .map(|(row, &y)| -row[y].ln())
        .sum::<f64>()
        / m;
    let reg: f64 = model
        .hidden
        .iter()
        .chain(std::iter::once(&model.head))
        .map(|l| l.weights.iter().map(|w| w * w).sum::<f64>())
        .sum::<f64>();
    ce + 0.5 * weight_decay * reg
}

/// Analytic gradient of [`batch_loss`] for every parameter, plus the loss.
pub(crate) fn batch_gradients(
    model: &ProbeModel,
    features: &[&[f32]],
    targets: &[usize],
    weight_decay: f64,
) -> Result<(Gradients, f64)> {
    let trace = model.forward_trace(features)?;
    let loss = loss_from_trace(model, &trace, targets, weight_decay);
    let m = targets.len() as f64;

    let mut grads = Gradients::zeroed_like(model);
    let n_layers = grads.layers.len();

    // d(loss)/d(logits): (p - onehot) / m, then walk backwards.
    let mut delta: Vec<Vec<f64>> = trace
        .probs
        .iter()
        .zip(targets)
        .map(|(row, &y)| {
            let mut d: Vec<f64> = row.iter().map(|&p| p / m).collect();
            d[y] -= 1.0 / m;
            d
        })
        .collect();

    for l in (0..n_layers).rev() {
        let layer = if l == n_layers - 1 {
            &model.head
        } else {
            &model.hidden[l]
        };
        let input = &trace.acts[l];
        let g = &mut grads.layers[l];
        for (x, d) in input.iter().zip(&delta) {
            for (i, &xi) in x.iter().enumerate() {
                let row = &mut g.weights[i * layer.out_dim..(i + 1) * layer.out_dim];
                for (gw, &dj) in row.iter_mut().zip(d) {
                    *gw += xi * dj;
                }
            }
            for (gb, &dj) in g.biases.iter_mut().zip(d) {
                *gb += dj;
            }
        }
        for (gw, &w) in g.weights.iter_mut().zip(&layer.weights) {
            *gw += weight_decay * w;
        }

        if l > 0 {
            // Propagate through the layer and the ReLU of the activation below.
            let below = &trace.acts[l];
            delta = delta
                .iter()
                .zip(below)
                .map(|(d, act)| {
                    (0..layer.in_dim)
                        .map(|i| {
                            if act[i] > 0.0 {
                                let row =
                                    &layer.weights[i * layer.out_dim..(i + 1) * layer.out_dim];
                                row.iter().zip(d).map(|(&w, &dj)| w * dj).sum()
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect();
        }
    }

    Ok((grads, loss))
}

/// Shuffled mini-batch SGD with classic momentum. Returns the trained model
/// and its per-epoch history; the input model is untouched.
pub fn train_sgd(
    model: &ProbeModel,
    data: &TrainSet,
    cfg: &TrainConfig,
) -> Result<(ProbeModel, TrainHistory)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidShape("training set is empty".into()));
    }
    if let Some(&bad) = data.targets.iter().find(|&&t| t >= model.n_classes()) {
        return Err(Error::InvalidShape(format!(
            "target index {bad} outside the model's {} classes",
            model.n_classes()
        )));
    }

    let mut model = model.clone();
    let mut history = TrainHistory {
        learning_rate: cfg.learning_rate,
        epochs: Vec::with_capacity(cfg.epochs),
    };
    if cfg.epochs == 0 {
        return Ok((model, history));
    }

    let mut velocity = Gradients::zeroed_like(&model);
    let mut rng = rng_from_seed(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;

        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let features: Vec<&[f32]> = chunk.iter().map(|&i| data.features[i]).collect();
            let targets: Vec<usize> = chunk.iter().map(|&i| data.targets[i]).collect();

            let (grads, loss) =
                batch_gradients(&model, &features, &targets, cfg.weight_decay)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            loss_sum += loss;
            batches += 1;

            let layers = model
                .hidden
                .iter_mut()
                .chain(std::iter::once(&mut model.head));
            for ((layer, g), v) in layers.zip(&grads.layers).zip(&mut velocity.layers) {
                for ((w, &gw), vw) in layer
                    .weights
                    .iter_mut()
                    .zip(&g.weights)
                    .zip(&mut v.weights)
                {
                    *vw = cfg.momentum * *vw + gw;
                    *w -= cfg.learning_rate * *vw;
                }
                for ((b, &gb), vb) in layer
                    .biases
                    .iter_mut()
                    .zip(&g.biases)
                    .zip(&mut v.biases)
                {
                    *vb = cfg.momentum * *vb + gb;
                    *b -= cfg.learning_rate * *vb;
                }
            }
        }

        let (preds, _) = model.predict(&data.features)?;
        let correct = preds
            .iter()
            .zip(&data.targets)
            .filter(|(p, t)| p == t)
            .count();
        history.epochs.push(EpochStats {
            epoch,
            mean_loss: loss_sum / batches as f64,
            train_accuracy: correct as f64 / data.len() as f64,
        });
    }

    Ok((model, history))
}

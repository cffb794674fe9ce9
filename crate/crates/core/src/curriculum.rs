//! Training strategies over the probe core: staged curriculum over the label
//! hierarchy, direct fine-grained training, self-directed refinement of a
//! noisy pool from a clean seed, and multi-task joint training.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::corpus::CorpusView;
use crate::error::{Error, Result};
use crate::hierarchy::EmotionHierarchy;
use crate::probe::{
    evaluate_on_view, init_model, train_sgd, DenseLayer, ProbeModel, TrainConfig, TrainHistory,
    TrainSet,
};
use crate::seeding::{derive_seed, rng_from_seed};

/// Ordered hierarchy levels for a staged run, with per-stage epoch budgets.
#[derive(Debug, Clone, Serialize)]
pub struct StagePlan {
    pub stages: Vec<u8>,
    pub epochs_per_stage: Vec<usize>,
    pub lr_transition_factor: f64,
}

impl StagePlan {
    /// Same epoch budget for every stage, default 1/10 transition factor.
    pub fn uniform(stages: &[u8], epochs: usize) -> Self {
        Self {
            stages: stages.to_vec(),
            epochs_per_stage: vec![epochs; stages.len()],
            lr_transition_factor: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::InvalidShape("stage plan is empty".into()));
        }
        if !self.stages.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidShape(
                "stage levels must be strictly increasing".into(),
            ));
        }
        if self.epochs_per_stage.len() != self.stages.len() {
            return Err(Error::InvalidShape(format!(
                "{} stages but {} epoch budgets",
                self.stages.len(),
                self.epochs_per_stage.len()
            )));
        }
        Ok(())
    }
}

/// One completed stage (or self-directed round).
#[derive(Debug, Clone, Serialize)]
pub struct StageOutcome {
    pub level: u8,
    pub learning_rate: f64,
    pub history: TrainHistory,
    /// Retained noisy-pool size, for self-directed rounds.
    pub retained: Option<usize>,
}

/// Outcome of one strategy run. `evaluations` maps a dataset id to the level
/// it was scored at and the accuracy (fraction in [0, 1]).
#[derive(Debug, Clone)]
pub struct StrategyResult {
    pub strategy: String,
    pub final_model: StrategyModel,
    pub stages: Vec<StageOutcome>,
    pub evaluations: BTreeMap<String, (u8, f64)>,
}

#[derive(Debug, Clone)]
pub enum StrategyModel {
    Probe(ProbeModel),
    MultiHead(MultiHeadModel),
}

impl StrategyResult {
    /// The single-head model used for scoring: the trained probe, or the
    /// finest head of a multi-head model.
    pub fn final_probe(&self) -> ProbeModel {
        match &self.final_model {
            StrategyModel::Probe(m) => m.clone(),
            StrategyModel::MultiHead(m) => m.to_probe(m.finest_level()),
        }
    }

    /// Score the final model on each view at `level` and record the results.
    pub fn evaluate_on(
        &mut self,
        views: &[CorpusView],
        level: u8,
        hierarchy: &EmotionHierarchy,
    ) -> Result<()> {
        let probe = self.final_probe();
        for view in views {
            let (acc, _) = evaluate_on_view(&probe, view, level, hierarchy)?;
            self.evaluations
                .insert(view.dataset_id().to_string(), (level, acc));
        }
        Ok(())
    }
}

fn stage_classes(hierarchy: &EmotionHierarchy, level: u8) -> Result<Vec<String>> {
    Ok(hierarchy.level_labels(level)?.to_vec())
}

/// Carry the hidden stack into a new stage: fresh head for the new label
/// space, everything else bit-identical. Momentum restarts with training.
pub fn advance_stage(
    model: &ProbeModel,
    classes: &[String],
    level: u8,
    head_seed: u64,
) -> ProbeModel {
    let head_in = model
        .hidden
        .last()
        .map_or(model.input_dim, |l| l.out_dim);
    let mut rng = rng_from_seed(head_seed);
    let head = DenseLayer::init(head_in, classes.len(), &mut rng);
    ProbeModel {
        input_dim: model.input_dim,
        hidden: model.hidden.clone(),
        head,
        classes: classes.to_vec(),
        level: Some(level),
        lineage: format!("{}; head@{level}:{head_seed}", model.lineage),
    }
}

/// Staged training coarse to fine. Stage k + 1 inherits the hidden stack,
/// re-initializes the head for the new label space, and multiplies the
/// learning rate by the transition factor.
pub fn curriculum_train(
    view: &CorpusView,
    hierarchy: &EmotionHierarchy,
    plan: &StagePlan,
    hidden_dims: &[usize],
    cfg: &TrainConfig,
) -> Result<StrategyResult> {
    plan.validate()?;
    cfg.validate()?;

    let mut stages = Vec::with_capacity(plan.stages.len());
    let mut model: Option<ProbeModel> = None;

    for (k, &level) in plan.stages.iter().enumerate() {
        let classes = stage_classes(hierarchy, level)?;
        let stage_model = match &model {
            None => {
                let seed = derive_seed(cfg.seed, &format!("stage:{k}:init"));
                let mut m = init_model(view.dim(), hidden_dims, &classes, seed)?;
                m.level = Some(level);
                m
            }
            Some(prev) => advance_stage(
                prev,
                &classes,
                level,
                derive_seed(cfg.seed, &format!("stage:{k}:init")),
            ),
        };

        let learning_rate = cfg.learning_rate * plan.lr_transition_factor.powi(k as i32);
        let stage_cfg = TrainConfig {
            learning_rate,
            epochs: plan.epochs_per_stage[k],
            seed: derive_seed(cfg.seed, &format!("stage:{k}:train")),
            ..cfg.clone()
        };
        let data = TrainSet::from_view_level(view, level, hierarchy, &classes)?;
        let (trained, history) = train_sgd(&stage_model, &data, &stage_cfg)?;

        stages.push(StageOutcome {
            level,
            learning_rate,
            history,
            retained: None,
        });
        model = Some(trained);
    }

    Ok(StrategyResult {
        strategy: format!(
            "curriculum[{}]",
            plan.stages
                .iter()
                .map(u8::to_string)
                .collect::<Vec<_>>()
                .join(",")
        ),
        final_model: StrategyModel::Probe(model.expect("plan validated nonempty")),
        stages,
        evaluations: BTreeMap::new(),
    })
}

/// Single-stage training on the finest label space; identical to a
/// one-stage curriculum under the same config.
pub fn direct_train(
    view: &CorpusView,
    hierarchy: &EmotionHierarchy,
    hidden_dims: &[usize],
    cfg: &TrainConfig,
) -> Result<StrategyResult> {
    let plan = StagePlan::uniform(&[hierarchy.depth()], cfg.epochs);
    let mut result = curriculum_train(view, hierarchy, &plan, hidden_dims, cfg)?;
    result.strategy = "direct".into();
    Ok(result)
}

/// Self-directed refinement settings: retention threshold, round budget,
/// and the relative change in retained-set size that stops the loop.
#[derive(Debug, Clone, Serialize)]
pub struct SelfDirectedOpts {
    pub tau: f64,
    pub max_rounds: usize,
    pub stop_rel_change: f64,
}

impl Default for SelfDirectedOpts {
    fn default() -> Self {
        Self {
            tau: 0.5,
            max_rounds: 3,
            stop_rel_change: 0.01,
        }
    }
}

/// One refinement round: the positions of the noisy pool that were kept.
#[derive(Debug, Clone)]
pub struct RefinementRound {
    pub retained: Vec<usize>,
    pub history: TrainHistory,
}

/// Bootstrap from a clean seed, then iteratively admit noisy samples the
/// current model agrees with (top-1 match, or weak-label confidence >= tau)
/// and continue training on clean plus retained.
pub fn self_directed_train(
    clean: &CorpusView,
    noisy: &CorpusView,
    hierarchy: &EmotionHierarchy,
    hidden_dims: &[usize],
    cfg: &TrainConfig,
    opts: &SelfDirectedOpts,
) -> Result<(StrategyResult, Vec<RefinementRound>)> {
    if clean.is_empty() {
        return Err(Error::EmptyCleanSet);
    }
    cfg.validate()?;
    let level = hierarchy.depth();
    let classes = stage_classes(hierarchy, level)?;

    let clean_set = TrainSet::from_view_level(clean, level, hierarchy, &classes)?;
    let noisy_set = TrainSet::from_view_level(noisy, level, hierarchy, &classes)?;

    let init_seed = derive_seed(cfg.seed, "selfdir:init");
    let mut model = init_model(clean.dim(), hidden_dims, &classes, init_seed)?;
    model.level = Some(level);

    let round0_cfg = TrainConfig {
        seed: derive_seed(cfg.seed, "selfdir:round:0"),
        ..cfg.clone()
    };
    let (mut model, history0) = train_sgd(&model, &clean_set, &round0_cfg)?;

    let mut stages = vec![StageOutcome {
        level,
        learning_rate: cfg.learning_rate,
        history: history0,
        retained: None,
    }];
    let mut rounds = Vec::new();
    let mut prev_retained: Option<usize> = None;

    for round in 1..=opts.max_rounds {
        let probs = model.forward(&noisy_set.features)?;
        let retained: Vec<usize> = probs
            .iter()
            .enumerate()
            .filter(|(i, row)| {
                let weak = noisy_set.targets[*i];
                crate::probe::argmax(row) == weak || row[weak] >= opts.tau
            })
            .map(|(i, _)| i)
            .collect();

        if retained.is_empty() {
            // Nothing to adapt to; the clean-seed model stands.
            rounds.push(RefinementRound {
                retained,
                history: TrainHistory::default(),
            });
            break;
        }
        if let Some(prev) = prev_retained {
            let change = (retained.len() as f64 - prev as f64).abs();
            if change < opts.stop_rel_change * (prev.max(1)) as f64 {
                rounds.push(RefinementRound {
                    retained,
                    history: TrainHistory::default(),
                });
                break;
            }
        }
        prev_retained = Some(retained.len());

        let mut features = clean_set.features.clone();
        let mut targets = clean_set.targets.clone();
        for &i in &retained {
            features.push(noisy_set.features[i]);
            targets.push(noisy_set.targets[i]);
        }
        let round_cfg = TrainConfig {
            seed: derive_seed(cfg.seed, &format!("selfdir:round:{round}")),
            ..cfg.clone()
        };
        let (next, history) = train_sgd(&model, &TrainSet { features, targets }, &round_cfg)?;
        model = next;

        stages.push(StageOutcome {
            level,
            learning_rate: cfg.learning_rate,
            history: history.clone(),
            retained: Some(retained.len()),
        });
        rounds.push(RefinementRound { retained, history });
    }

    Ok((
        StrategyResult {
            strategy: "self-directed".into(),
            final_model: StrategyModel::Probe(model),
            stages,
            evaluations: BTreeMap::new(),
        },
        rounds,
    ))
}

/// Shared hidden stack with one softmax head per hierarchy level.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadModel {
    pub input_dim: usize,
    pub hidden: Vec<DenseLayer>,
    pub heads: Vec<JointHead>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointHead {
    pub level: u8,
    pub classes: Vec<String>,
    pub layer: DenseLayer,
}

impl MultiHeadModel {
    pub fn finest_level(&self) -> u8 {
        self.heads.iter().map(|h| h.level).max().unwrap_or(0)
    }

    pub fn num_params(&self) -> usize {
        self.hidden.iter().map(DenseLayer::num_params).sum::<usize>()
            + self.heads.iter().map(|h| h.layer.num_params()).sum::<usize>()
    }

    /// Extract one head (with the shared stack) as a plain probe.
    pub fn to_probe(&self, level: u8) -> ProbeModel {
        let head = self
            .heads
            .iter()
            .find(|h| h.level == level)
            .expect("head for requested level");
        ProbeModel {
            input_dim: self.input_dim,
            hidden: self.hidden.clone(),
            head: head.layer.clone(),
            classes: head.classes.clone(),
            level: Some(level),
            lineage: format!("joint head@{level}"),
        }
    }

}

fn layer_forward_relu(layer: &DenseLayer, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
    xs.iter()
        .map(|x| {
            let mut out = layer.biases.clone();
            for (i, &xi) in x.iter().enumerate() {
                let row = &layer.weights[i * layer.out_dim..(i + 1) * layer.out_dim];
                for (o, &w) in out.iter_mut().zip(row) {
                    *o += xi * w;
                }
            }
            for v in &mut out {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            out
        })
        .collect()
}

pub(crate) struct JointGradients {
    pub hidden: Vec<DenseLayer>,
    pub heads: Vec<DenseLayer>,
    pub loss: f64,
}

/// Batch gradient of `sum_k lambda_k * CE_k + wd/2 * ||W||^2` over all
/// weight matrices (shared stack and every head).
pub(crate) fn joint_batch_gradients(
    model: &MultiHeadModel,
    features: &[&[f32]],
    targets_per_head: &[Vec<usize>],
    loss_weights: &[f64],
    weight_decay: f64,
) -> JointGradients {
    let m = features.len() as f64;

    // Shared forward with intermediate activations.
    let mut acts: Vec<Vec<Vec<f64>>> = vec![features
        .iter()
        .map(|x| x.iter().map(|&v| f64::from(v)).collect())
        .collect()];
    for layer in &model.hidden {
        let next = layer_forward_relu(layer, acts.last().unwrap());
        acts.push(next);
    }
    let shared = acts.last().unwrap();

    let mut loss = 0.0;
    let mut head_grads = Vec::with_capacity(model.heads.len());
    let shared_width = shared[0].len();
    let mut shared_delta = vec![vec![0.0f64; shared_width]; features.len()];

    for ((head, targets), &lambda) in model.heads.iter().zip(targets_per_head).zip(loss_weights) {
        let layer = &head.layer;
        let mut g = DenseLayer::zeroed(layer.in_dim, layer.out_dim);
        if lambda == 0.0 {
            // Zero-weight heads only feel weight decay.
            for (gw, &w) in g.weights.iter_mut().zip(&layer.weights) {
                *gw += weight_decay * w;
            }
            head_grads.push(g);
            continue;
        }

        for ((b, h), &y) in shared.iter().enumerate().zip(targets) {
            let mut logits = layer.biases.clone();
            for (i, &hi) in h.iter().enumerate() {
                let row = &layer.weights[i * layer.out_dim..(i + 1) * layer.out_dim];
                for (o, &w) in logits.iter_mut().zip(row) {
                    *o += hi * w;
                }
            }
            let p = crate::probe::softmax(&logits);
            loss += -lambda * p[y].ln() / m;
            let mut dz: Vec<f64> = p.iter().map(|&pi| lambda * pi / m).collect();
            dz[y] -= lambda / m;

            for (i, &hi) in h.iter().enumerate() {
                let row = &mut g.weights[i * layer.out_dim..(i + 1) * layer.out_dim];
                for (gw, &dj) in row.iter_mut().zip(&dz) {
                    *gw += hi * dj;
                }
            }
            for (gb, &dj) in g.biases.iter_mut().zip(&dz) {
                *gb += dj;
            }
            // Accumulate W * dz into the shared stack's delta; ReLU gates
            // are applied in the backward walk below.
            for (i, sd) in shared_delta[b].iter_mut().enumerate() {
                let row = &layer.weights[i * layer.out_dim..(i + 1) * layer.out_dim];
                *sd += row.iter().zip(&dz).map(|(&w, &dj)| w * dj).sum::<f64>();
            }
        }
        for (gw, &w) in g.weights.iter_mut().zip(&layer.weights) {
            *gw += weight_decay * w;
        }
        head_grads.push(g);
    }

    loss += 0.5
        * weight_decay
        * (model
            .hidden
            .iter()
            .map(|l| l.weights.iter().map(|w| w * w).sum::<f64>())
            .sum::<f64>()
            + model
                .heads
                .iter()
                .map(|h| h.layer.weights.iter().map(|w| w * w).sum::<f64>())
                .sum::<f64>());

    // Walk the shared stack backwards.
    let mut hidden_grads: Vec<DenseLayer> = model
        .hidden
        .iter()
        .map(|l| DenseLayer::zeroed(l.in_dim, l.out_dim))
        .collect();
    let mut delta = shared_delta;
    for l in (0..model.hidden.len()).rev() {
        let layer = &model.hidden[l];
        let input = &acts[l];
        // The delta arriving here already respects the ReLU of acts[l + 1].
        for (b, d) in delta.iter_mut().enumerate() {
            for (j, dj) in d.iter_mut().enumerate() {
                if acts[l + 1][b][j] <= 0.0 {
                    *dj = 0.0;
                }
            }
        }
        let g = &mut hidden_grads[l];
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
            delta = delta
                .iter()
                .map(|d| {
                    (0..layer.in_dim)
                        .map(|i| {
                            let row = &layer.weights[i * layer.out_dim..(i + 1) * layer.out_dim];
                            row.iter().zip(d).map(|(&w, &dj)| w * dj).sum()
                        })
                        .collect()
                })
                .collect();
        }
    }

    JointGradients {
        hidden: hidden_grads,
        heads: head_grads,
        loss,
    }
}

/// Multi-task training: one shared stack, one head per hierarchy level,
/// per-batch loss `sum_k lambda_k * CE_k`. Coarse targets derive from the
/// finest labels through the hierarchy. Evaluation uses the finest head.
pub fn joint_train(
    view: &CorpusView,
    hierarchy: &EmotionHierarchy,
    hidden_dims: &[usize],
    cfg: &TrainConfig,
    loss_weights: &[f64],
) -> Result<StrategyResult> {
    cfg.validate()?;
    let depth = hierarchy.depth();
    if loss_weights.len() != depth as usize {
        return Err(Error::InvalidShape(format!(
            "{} loss weights for {} hierarchy levels",
            loss_weights.len(),
            depth
        )));
    }

    // Shared stack plus one head per level, each from its own seed stream.
    let mut rng = rng_from_seed(derive_seed(cfg.seed, "joint:hidden"));
    let mut hidden = Vec::with_capacity(hidden_dims.len());
    let mut prev = view.dim();
    for &width in hidden_dims {
        if width == 0 {
            return Err(Error::InvalidShape("hidden widths must be positive".into()));
        }
        hidden.push(DenseLayer::init(prev, width, &mut rng));
        prev = width;
    }
    let mut heads = Vec::with_capacity(depth as usize);
    for level in 1..=depth {
        let classes = stage_classes(hierarchy, level)?;
        let mut head_rng = rng_from_seed(derive_seed(cfg.seed, &format!("joint:head:{level}")));
        heads.push(JointHead {
            level,
            classes: classes.clone(),
            layer: DenseLayer::init(prev, classes.len(), &mut head_rng),
        });
    }
    let mut model = MultiHeadModel {
        input_dim: view.dim(),
        hidden,
        heads,
    };

    // Targets per head, derived once.
    let mut features = Vec::with_capacity(view.len());
    for i in 0..view.len() {
        features.push(view.feature(i));
    }
    let mut targets_per_head: Vec<Vec<usize>> = Vec::with_capacity(depth as usize);
    for head in &model.heads {
        let set = TrainSet::from_view_level(view, head.level, hierarchy, &head.classes)?;
        targets_per_head.push(set.targets);
    }

    let mut velocity_hidden: Vec<DenseLayer> = model
        .hidden
        .iter()
        .map(|l| DenseLayer::zeroed(l.in_dim, l.out_dim))
        .collect();
    let mut velocity_heads: Vec<DenseLayer> = model
        .heads
        .iter()
        .map(|h| DenseLayer::zeroed(h.layer.in_dim, h.layer.out_dim))
        .collect();

    let mut rng = rng_from_seed(derive_seed(cfg.seed, "joint:train"));
    let mut order: Vec<usize> = (0..view.len()).collect();
    let mut history = TrainHistory {
        learning_rate: cfg.learning_rate,
        epochs: Vec::with_capacity(cfg.epochs),
    };

    use rand::seq::SliceRandom;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;

        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch_features: Vec<&[f32]> = chunk.iter().map(|&i| features[i]).collect();
            let batch_targets: Vec<Vec<usize>> = targets_per_head
                .iter()
                .map(|t| chunk.iter().map(|&i| t[i]).collect())
                .collect();

            let grads = joint_batch_gradients(
                &model,
                &batch_features,
                &batch_targets,
                loss_weights,
                cfg.weight_decay,
            );
            if !grads.loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            loss_sum += grads.loss;
            batches += 1;

            for ((layer, g), v) in model
                .hidden
                .iter_mut()
                .zip(&grads.hidden)
                .zip(&mut velocity_hidden)
            {
                sgd_step(layer, g, v, cfg);
            }
            for ((head, g), v) in model
                .heads
                .iter_mut()
                .zip(&grads.heads)
                .zip(&mut velocity_heads)
            {
                sgd_step(&mut head.layer, g, v, cfg);
            }
        }

        // Track the finest head's training accuracy.
        let probe = model.to_probe(depth);
        let (preds, _) = probe.predict(&features)?;
        let finest = &targets_per_head[depth as usize - 1];
        let correct = preds.iter().zip(finest).filter(|(p, t)| p == t).count();
        history.epochs.push(crate::probe::EpochStats {
            epoch,
            mean_loss: loss_sum / batches.max(1) as f64,
            train_accuracy: correct as f64 / view.len() as f64,
        });
    }

    Ok(StrategyResult {
        strategy: "joint".into(),
        final_model: StrategyModel::MultiHead(model),
        stages: vec![StageOutcome {
            level: depth,
            learning_rate: cfg.learning_rate,
            history,
            retained: None,
        }],
        evaluations: BTreeMap::new(),
    })
}

fn sgd_step(layer: &mut DenseLayer, g: &DenseLayer, v: &mut DenseLayer, cfg: &TrainConfig) {
    for ((w, &gw), vw) in layer.weights.iter_mut().zip(&g.weights).zip(&mut v.weights) {
        *vw = cfg.momentum * *vw + gw;
        *w -= cfg.learning_rate * *vw;
    }
    for ((b, &gb), vb) in layer.biases.iter_mut().zip(&g.biases).zip(&mut v.biases) {
        *vb = cfg.momentum * *vb + gb;
        *b -= cfg.learning_rate * *vb;
    }
}

/// One strategy-comparison row: self accuracy plus per-dataset transfer.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub strategy: String,
    pub self_dataset: String,
    pub self_accuracy: f64,
    pub per_dataset: BTreeMap<String, f64>,
    pub mean_others: Option<f64>,
}

/// Assemble comparison rows (accuracies in percent) from evaluated results.
pub fn comparison_rows(results: &[StrategyResult], self_id: &str) -> Vec<ComparisonRow> {
    results
        .iter()
        .map(|r| {
            let per_dataset: BTreeMap<String, f64> = r
                .evaluations
                .iter()
                .map(|(id, (_, acc))| (id.clone(), acc * 100.0))
                .collect();
            let self_accuracy = per_dataset.get(self_id).copied().unwrap_or(f64::NAN);
            let others: Vec<f64> = per_dataset
                .iter()
                .filter(|(id, _)| id.as_str() != self_id)
                .map(|(_, &a)| a)
                .collect();
            let mean_others = if others.is_empty() {
                None
            } else {
                Some(others.iter().sum::<f64>() / others.len() as f64)
            };
            ComparisonRow {
                strategy: r.strategy.clone(),
                self_dataset: self_id.to_string(),
                self_accuracy,
                per_dataset,
                mean_others,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests;

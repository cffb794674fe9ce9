use serde::Serialize;

use crate::corpus::CorpusView;
use crate::error::{Error, Result};
use crate::hierarchy::EmotionHierarchy;
use crate::probe::{init_model, train_sgd, TrainConfig, TrainSet};
use crate::seeding::derive_seed;

/// Sample budget for the negative-bias probe; defaults follow the
/// 500/2000 train and 200/4000 test protocol.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NegBiasCounts {
    pub train_pos: usize,
    pub train_neg: usize,
    pub test_pos: usize,
    pub test_neg: usize,
}

impl Default for NegBiasCounts {
    fn default() -> Self {
        Self {
            train_pos: 500,
            train_neg: 2000,
            test_pos: 200,
            test_neg: 4000,
        }
    }
}

/// Self vs external-negatives accuracy (percent) and the relative drop.
#[derive(Debug, Clone, Serialize)]
pub struct NegBiasResult {
    pub emotion: String,
    pub self_acc: f64,
    pub others_acc: f64,
    pub percent_drop: f64,
}

/// Train "emotion vs rest" on the target dataset's own positives and
/// negatives, then compare held-out self accuracy against a test set whose
/// negatives are pooled from the other datasets.
pub fn negative_bias_test(
    target: &CorpusView,
    others: &[CorpusView],
    hierarchy: &EmotionHierarchy,
    emotion: &str,
    counts: &NegBiasCounts,
    hidden_dims: &[usize],
    cfg: &TrainConfig,
) -> Result<NegBiasResult> {
    if !hierarchy.contains(emotion, 2) {
        return Err(Error::UnknownLabel {
            label: emotion.to_string(),
            level: 2,
        });
    }

    let is_positive = |view: &CorpusView, i: usize| -> Result<bool> {
        Ok(view.record(i).label_at(2, hierarchy)?.name == emotion)
    };

    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for i in 0..target.len() {
        if is_positive(target, i)? {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    let need_pos = counts.train_pos + counts.test_pos;
    let need_neg = counts.train_neg + counts.test_neg;
    if pos.len() < need_pos {
        return Err(Error::InsufficientSamples {
            class: emotion.to_string(),
            available: pos.len(),
            requested: need_pos,
        });
    }
    if neg.len() < need_neg {
        return Err(Error::InsufficientSamples {
            class: format!("non-{emotion}"),
            available: neg.len(),
            requested: need_neg,
        });
    }

    let pos_picks = super::seeded_sample(pos.len(), need_pos, cfg.seed, "negbias:pos");
    let neg_picks = super::seeded_sample(neg.len(), need_neg, cfg.seed, "negbias:neg");
    let train_pos: Vec<usize> = pos_picks[..counts.train_pos].iter().map(|&k| pos[k]).collect();
    let test_pos: Vec<usize> = pos_picks[counts.train_pos..].iter().map(|&k| pos[k]).collect();
    let train_neg: Vec<usize> = neg_picks[..counts.train_neg].iter().map(|&k| neg[k]).collect();
    let test_neg: Vec<usize> = neg_picks[counts.train_neg..].iter().map(|&k| neg[k]).collect();

    // External negatives, pooled across the other datasets.
    let mut external: Vec<(usize, usize)> = Vec::new();
    for (v, view) in others.iter().enumerate() {
        for i in 0..view.len() {
            if !is_positive(view, i)? {
                external.push((v, i));
            }
        }
    }
    if external.len() < counts.test_neg {
        return Err(Error::InsufficientSamples {
            class: format!("non-{emotion} (external)"),
            available: external.len(),
            requested: counts.test_neg,
        });
    }
    let ext_picks = super::seeded_sample(external.len(), counts.test_neg, cfg.seed, "negbias:others");

    let classes = vec![emotion.to_string(), format!("non-{emotion}")];
    let model = init_model(
        target.dim(),
        hidden_dims,
        &classes,
        derive_seed(cfg.seed, "negbias:init"),
    )?;

    let mut features: Vec<&[f32]> = Vec::with_capacity(counts.train_pos + counts.train_neg);
    let mut targets = Vec::with_capacity(features.capacity());
    for &i in &train_pos {
        features.push(target.feature(i));
        targets.push(0);
    }
    for &i in &train_neg {
        features.push(target.feature(i));
        targets.push(1);
    }
    let train_cfg = TrainConfig {
        seed: derive_seed(cfg.seed, "negbias:train"),
        ..cfg.clone()
    };
    let (trained, _) = train_sgd(&model, &TrainSet { features, targets }, &train_cfg)?;

    let accuracy = |feats: &[&[f32]], truth: &[usize]| -> Result<f64> {
        let (preds, _) = trained.predict(feats)?;
        let hits = preds.iter().zip(truth).filter(|(p, t)| p == t).count();
        Ok(hits as f64 / truth.len() as f64)
    };

    // Self: held-out target positives and negatives.
    let mut self_features: Vec<&[f32]> = Vec::new();
    let mut self_targets = Vec::new();
    for &i in &test_pos {
        self_features.push(target.feature(i));
        self_targets.push(0);
    }
    for &i in &test_neg {
        self_features.push(target.feature(i));
        self_targets.push(1);
    }
    let self_acc = accuracy(&self_features, &self_targets)? * 100.0;

    // Others: the same positives, but negatives from everywhere else.
    let mut other_features: Vec<&[f32]> = Vec::new();
    let mut other_targets = Vec::new();
    for &i in &test_pos {
        other_features.push(target.feature(i));
        other_targets.push(0);
    }
    for &k in &ext_picks {
        let (v, i) = external[k];
        other_features.push(others[v].feature(i));
        other_targets.push(1);
    }
    let others_acc = accuracy(&other_features, &other_targets)? * 100.0;

    Ok(NegBiasResult {
        emotion: emotion.to_string(),
        self_acc,
        others_acc,
        percent_drop: super::percent_drop(self_acc, &[others_acc])?,
    })
}

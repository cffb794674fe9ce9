use serde::Serialize;

use crate::corpus::CorpusView;
use crate::error::{Error, Result};
use crate::hierarchy::EmotionHierarchy;
use crate::probe::{evaluate_on_view, init_model, train_sgd, TrainConfig, TrainSet};
use crate::seeding::derive_seed;

/// One dataset's train and held-out test views.
#[derive(Debug, Clone)]
pub struct SplitPair<'a> {
    pub train: CorpusView<'a>,
    pub test: CorpusView<'a>,
}

impl<'a> SplitPair<'a> {
    pub fn dataset_id(&self) -> &str {
        self.train.dataset_id()
    }
}

/// Per-train-dataset summary: diagonal, off-diagonal mean, relative drop.
#[derive(Debug, Clone, Serialize)]
pub struct CrossGenRow {
    pub dataset: String,
    pub self_acc: f64,
    pub mean_others: Option<f64>,
    pub percent_drop: Option<f64>,
}

/// Accuracy matrix in percent: `acc[i][j]` trains on dataset `i` and tests
/// on dataset `j` after mapping predictions and truths to level 1.
#[derive(Debug, Clone, Serialize)]
pub struct CrossGenMatrix {
    pub datasets: Vec<String>,
    pub acc: Vec<Vec<f64>>,
    pub rows: Vec<CrossGenRow>,
}

impl CrossGenMatrix {
    /// Assemble the derived row statistics from a filled matrix.
    pub fn from_accuracies(datasets: Vec<String>, acc: Vec<Vec<f64>>) -> Result<Self> {
        let mut rows = Vec::with_capacity(datasets.len());
        for (i, dataset) in datasets.iter().enumerate() {
            let self_acc = acc[i][i];
            let others: Vec<f64> = acc[i]
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, &a)| a)
                .collect();
            let mean_others = if others.is_empty() {
                None
            } else {
                Some(others.iter().sum::<f64>() / others.len() as f64)
            };
            let percent_drop = if others.is_empty() || self_acc <= 0.0 {
                None
            } else {
                Some(super::percent_drop(self_acc, &others)?)
            };
            rows.push(CrossGenRow {
                dataset: dataset.clone(),
                self_acc,
                mean_others,
                percent_drop,
            });
        }
        Ok(Self {
            datasets,
            acc,
            rows,
        })
    }
}

/// For every dataset, train a probe on its native label space, then score
/// every dataset's test split at level 1 (positive vs negative).
pub fn cross_generalization(
    splits: &[SplitPair],
    hierarchy: &EmotionHierarchy,
    hidden_dims: &[usize],
    cfg: &TrainConfig,
) -> Result<CrossGenMatrix> {
    if splits.is_empty() {
        return Err(Error::InvalidShape("no datasets given".into()));
    }
    let datasets: Vec<String> = splits.iter().map(|s| s.dataset_id().to_string()).collect();

    let mut acc = vec![vec![0.0f64; splits.len()]; splits.len()];
    for (i, split) in splits.iter().enumerate() {
        let native = split.train.native_level().ok_or(Error::MissingLabel {
            id: format!("<dataset {}>", split.dataset_id()),
            level: 1,
        })?;
        let classes = hierarchy.level_labels(native)?.to_vec();
        let mut model = init_model(
            split.train.dim(),
            hidden_dims,
            &classes,
            derive_seed(cfg.seed, &format!("crossgen:{}:init", split.dataset_id())),
        )?;
        model.level = Some(native);

        let data = TrainSet::from_view_level(&split.train, native, hierarchy, &classes)?;
        let train_cfg = TrainConfig {
            seed: derive_seed(cfg.seed, &format!("crossgen:{}:train", split.dataset_id())),
            ..cfg.clone()
        };
        let (trained, _) = train_sgd(&model, &data, &train_cfg)?;

        for (j, other) in splits.iter().enumerate() {
            let (fraction, _) = evaluate_on_view(&trained, &other.test, 1, hierarchy)?;
            acc[i][j] = fraction * 100.0;
        }
    }

    CrossGenMatrix::from_accuracies(datasets, acc)
}

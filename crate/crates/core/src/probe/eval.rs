use serde::Serialize;

use crate::corpus::CorpusView;
use crate::error::{Error, Result};
use crate::hierarchy::{EmotionHierarchy, Label};

use super::ProbeModel;

/// Rows are ground truth, columns are predictions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let k = classes.len();
        Self {
            classes,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn record(&mut self, truth: usize, pred: usize) {
        self.counts[truth][pred] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Fraction correct; 0 over an empty matrix.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.trace() as f64 / total as f64
        }
    }
}

/// Score a model against per-sample target indices into `classes`.
pub fn evaluate_indexed(
    model: &ProbeModel,
    features: &[&[f32]],
    targets: &[usize],
) -> Result<(f64, ConfusionMatrix)> {
    let (preds, _) = model.predict(features)?;
    let mut matrix = ConfusionMatrix::new(model.classes.clone());
    for (&t, &p) in targets.iter().zip(&preds) {
        matrix.record(t, p);
    }
    Ok((matrix.accuracy(), matrix))
}

/// Score a model on a corpus view at `eval_level`.
///
/// When `eval_level` is coarser than the model's label space, both the
/// prediction and the ground truth are mapped up the hierarchy before
/// scoring, so a fine model can be graded on the binary task.
pub fn evaluate_on_view(
    model: &ProbeModel,
    view: &CorpusView,
    eval_level: u8,
    hierarchy: &EmotionHierarchy,
) -> Result<(f64, ConfusionMatrix)> {
    let model_level = model.level.ok_or_else(|| {
        Error::InvalidShape("model has no hierarchy level; use evaluate_indexed".into())
    })?;
    if eval_level > model_level {
        return Err(Error::InvalidDirection {
            from: model_level,
            to: eval_level,
        });
    }

    let eval_classes = hierarchy.level_labels(eval_level)?.to_vec();
    let class_index = |name: &str| -> Result<usize> {
        eval_classes
            .iter()
            .position(|c| c == name)
            .ok_or(Error::UnknownLabel {
                label: name.to_string(),
                level: eval_level,
            })
    };

    // Precompute the coarse index of each model class.
    let mapped: Vec<usize> = model
        .classes
        .iter()
        .map(|name| {
            let coarse = hierarchy.map_label(&Label::new(name.clone(), model_level), eval_level)?;
            class_index(&coarse.name)
        })
        .collect::<Result<_>>()?;

    let features: Vec<&[f32]> = (0..view.len()).map(|i| view.feature(i)).collect();
    let (preds, _) = model.predict(&features)?;

    let mut matrix = ConfusionMatrix::new(eval_classes.clone());
    for (i, &p) in preds.iter().enumerate() {
        let truth = view.record(i).label_at(eval_level, hierarchy)?;
        matrix.record(class_index(&truth.name)?, mapped[p]);
    }
    Ok((matrix.accuracy(), matrix))
}

use serde::Serialize;

use crate::corpus::CorpusView;
use crate::error::{Error, Result};
use crate::probe::{evaluate_indexed, init_model, train_sgd, ConfusionMatrix, TrainConfig, TrainSet};
use crate::seeding::derive_seed;

/// Origin-classification outcome: accuracy well above `chance` means the
/// datasets carry tell-tale signatures.
#[derive(Debug, Clone, Serialize)]
pub struct NameThatDatasetOutcome {
    pub datasets: Vec<String>,
    /// Fraction correct in [0, 1].
    pub accuracy: f64,
    pub chance: f64,
    pub confusion: ConfusionMatrix,
}

/// Train a linear probe to predict which dataset a feature vector came
/// from, on `n_train_per` samples per dataset, and test it on `n_test_per`
/// held-out samples per dataset.
pub fn name_that_dataset(
    views: &[CorpusView],
    n_train_per: usize,
    n_test_per: usize,
    cfg: &TrainConfig,
) -> Result<NameThatDatasetOutcome> {
    if views.is_empty() {
        return Err(Error::InvalidShape("no datasets given".into()));
    }
    let dim = views[0].dim();
    let mut classes = Vec::with_capacity(views.len());
    for v in views {
        if v.dim() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                got: v.dim(),
                context: format!("feature width of `{}`", v.dataset_id()),
            });
        }
        if classes.iter().any(|c| c == v.dataset_id()) {
            return Err(Error::DuplicateId {
                id: v.dataset_id().to_string(),
            });
        }
        classes.push(v.dataset_id().to_string());
    }

    let want = n_train_per + n_test_per;
    let mut train_features = Vec::with_capacity(views.len() * n_train_per);
    let mut train_targets = Vec::with_capacity(views.len() * n_train_per);
    let mut test_features = Vec::with_capacity(views.len() * n_test_per);
    let mut test_targets = Vec::with_capacity(views.len() * n_test_per);

    for (class, view) in views.iter().enumerate() {
        if view.len() < want {
            return Err(Error::InsufficientSamples {
                class: view.dataset_id().to_string(),
                available: view.len(),
                requested: want,
            });
        }
        let picks = super::seeded_sample(
            view.len(),
            want,
            cfg.seed,
            &format!("ntd:{}", view.dataset_id()),
        );
        for &p in &picks[..n_train_per] {
            train_features.push(view.feature(p));
            train_targets.push(class);
        }
        for &p in &picks[n_train_per..] {
            test_features.push(view.feature(p));
            test_targets.push(class);
        }
    }

    let model = init_model(dim, &[], &classes, derive_seed(cfg.seed, "ntd:init"))?;
    let train_cfg = TrainConfig {
        seed: derive_seed(cfg.seed, "ntd:train"),
        ..cfg.clone()
    };
    let (trained, _) = train_sgd(
        &model,
        &TrainSet {
            features: train_features,
            targets: train_targets,
        },
        &train_cfg,
    )?;

    let (accuracy, confusion) = evaluate_indexed(&trained, &test_features, &test_targets)?;
    Ok(NameThatDatasetOutcome {
        datasets: classes.clone(),
        accuracy,
        chance: 1.0 / classes.len() as f64,
        confusion,
    })
}

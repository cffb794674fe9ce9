//! The dataset-bias battery: origin classification ("name that dataset"),
//! binary cross-dataset generalization, negative-set bias probes, and
//! conditional-entropy concept analysis, plus the relative %-drop statistic
//! they report.

mod crossgen;
mod entropy;
mod negbias;
mod origin;

pub use crossgen::{cross_generalization, CrossGenMatrix, CrossGenRow, SplitPair};
pub use entropy::{
    binary_entropy_bits, conditional_entropy_analysis, EntropyAnalysis, EntropyHistogram,
    EntropyOpts, EntropyRecord, HistogramBin,
};
pub use negbias::{negative_bias_test, NegBiasCounts, NegBiasResult};
pub use origin::{name_that_dataset, NameThatDatasetOutcome};

use crate::error::{Error, Result};
use crate::seeding::{derive_seed, rng_from_seed};

/// Relative performance drop, in percent: `100 * (self - mean(others)) / self`.
///
/// Negative when the model does better away from home.
pub fn percent_drop(self_acc: f64, others: &[f64]) -> Result<f64> {
    if others.is_empty() {
        return Err(Error::DivisionDomain(
            "mean of an empty others list".into(),
        ));
    }
    if self_acc <= 0.0 {
        return Err(Error::DivisionDomain(format!(
            "self accuracy must be positive, got {self_acc}"
        )));
    }
    let mean = others.iter().sum::<f64>() / others.len() as f64;
    Ok(100.0 * (self_acc - mean) / self_acc)
}

/// First `take` positions of a seeded shuffle of `0..len`.
pub(crate) fn seeded_sample(len: usize, take: usize, seed: u64, tag: &str) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut positions: Vec<usize> = (0..len).collect();
    positions.shuffle(&mut rng_from_seed(derive_seed(seed, tag)));
    positions.truncate(take);
    positions
}

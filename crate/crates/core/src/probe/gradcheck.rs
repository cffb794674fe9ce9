//! Finite-difference oracle for the SGD core.
//!
//! The analytic gradients from backpropagation are compared parameter-wise
//! against central differences of the same regularized batch loss. Only the
//! forward pass is exercised on the numeric side, so the check stays
//! independent of the backprop code it validates.

use crate::error::Result;

use super::train::{batch_gradients, batch_loss};
use super::ProbeModel;

/// Max over all parameters of `|g_a - g_n| / max(|g_a|, |g_n|, 1e-8)`.
pub fn grad_check(
    model: &ProbeModel,
    features: &[&[f32]],
    targets: &[usize],
    weight_decay: f64,
    eps: f64,
) -> Result<f64> {
    assert!(!features.is_empty(), "grad_check needs a nonempty batch");
    let (analytic, _) = batch_gradients(model, features, targets, weight_decay)?;

    let n_layers = analytic.layers.len();
    let mut worst = 0.0f64;
    let mut scratch = model.clone();

    for l in 0..n_layers {
        let n_weights = analytic.layers[l].weights.len();
        let n_biases = analytic.layers[l].biases.len();
        for p in 0..n_weights + n_biases {
            let read = |m: &ProbeModel| -> f64 {
                let layer = if l == n_layers - 1 { &m.head } else { &m.hidden[l] };
                if p < n_weights {
                    layer.weights[p]
                } else {
                    layer.biases[p - n_weights]
                }
            };
            let write = |m: &mut ProbeModel, v: f64| {
                let layer = if l == n_layers - 1 {
                    &mut m.head
                } else {
                    &mut m.hidden[l]
                };
                if p < n_weights {
                    layer.weights[p] = v;
                } else {
                    layer.biases[p - n_weights] = v;
                }
            };

            let original = read(&scratch);
            write(&mut scratch, original + eps);
            let up = batch_loss(&scratch, features, targets, weight_decay)?;
            write(&mut scratch, original - eps);
            let down = batch_loss(&scratch, features, targets, weight_decay)?;
            write(&mut scratch, original);

            let numeric = (up - down) / (2.0 * eps);
            let ga = if p < n_weights {
                analytic.layers[l].weights[p]
            } else {
                analytic.layers[l].biases[p - n_weights]
            };
            let err = (ga - numeric).abs() / ga.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

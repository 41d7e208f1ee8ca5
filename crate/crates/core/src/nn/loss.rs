//! Training losses. Each returns the batch-mean loss and `∂L/∂output`.

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `‖y − t‖²/‖t‖²` per sample.
    NormalizedMse,
    /// `‖y − t‖²` per sample.
    Mse,
    /// `−ln y[label]` on probability outputs.
    CrossEntropy,
}

/// Targets for one batch.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    Values(&'a [f64]),
    Labels(&'a [usize]),
}

const PROB_FLOOR: f64 = 1e-300;

pub fn loss_and_grad(kind: LossKind, output: &Tensor, target: Target<'_>) -> Result<(f64, Tensor)> {
    let batch = output.batch();
    let f = output.sample_len();
    let y = output.data();
    let mut grad = vec![0.0; y.len()];
    let mut total = 0.0;
    match (kind, target) {
        (LossKind::NormalizedMse | LossKind::Mse, Target::Values(t)) => {
            if t.len() != y.len() {
                return Err(Error::dim(y.len(), t.len()));
            }
            for s in 0..batch {
                let r = s * f..(s + 1) * f;
                let norm = if kind == LossKind::NormalizedMse {
                    t[r.clone()].iter().map(|v| v * v).sum::<f64>().max(PROB_FLOOR)
                } else {
                    1.0
                };
                for i in r {
                    let d = y[i] - t[i];
                    total += d * d / norm;
                    grad[i] = 2.0 * d / (norm * batch as f64);
                }
            }
        }
        (LossKind::CrossEntropy, Target::Labels(labels)) => {
            if labels.len() != batch {
                return Err(Error::dim(batch, labels.len()));
            }
            for (s, &c) in labels.iter().enumerate() {
                if c >= f {
                    return Err(Error::InvalidParameter(format!("label {c} out of {f} classes")));
                }
                let p = y[s * f + c].max(PROB_FLOOR);
                total -= p.ln();
                grad[s * f + c] = -1.0 / (p * batch as f64);
            }
        }
        _ => {
            return Err(Error::InvalidParameter(format!("target kind does not fit loss {kind:?}")));
        }
    }
    Ok((total / batch as f64, Tensor::new(output.shape().to_vec(), grad)?))
}

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{HanError, Result};

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    /// Gradient with respect to the pre-softmax logits.
    pub d_logits: [f64; 2],
    /// The label probability was below [`PROB_FLOOR`].
    pub clamped: bool,
}

/// `-w[label] * ln(probs[label])` and its logit gradient
/// `w[label] * (probs - onehot(label))`.
pub fn weighted_cross_entropy(probs: &[f64], label: Label, weights: [f64; 2]) -> Result<LossOutput> {
    if probs.len() != 2 {
        return Err(HanError::dim("weighted_cross_entropy", &[probs.len()], &[2]));
    }
    let y = label.index();
    let w = weights[y];
    let p = probs[y];
    let clamped = !(p >= PROB_FLOOR);
    let loss = -w * p.max(PROB_FLOOR).ln();
    let mut d_logits = [w * probs[0], w * probs[1]];
    d_logits[y] -= w;
    Ok(LossOutput { loss, d_logits, clamped })
}

/// Balanced class weights `N / (2 N_c)` as exact fractions.
pub fn auto_class_weights(labels: &[Label]) -> Result<[Ratio<u64>; 2]> {
    let n1 = labels.iter().filter(|&&l| l == Label::Unreliable).count() as u64;
    let n0 = labels.len() as u64 - n1;
    class_weights_from_counts(n0, n1)
}

pub fn class_weights_from_counts(n_reliable: u64, n_unreliable: u64) -> Result<[Ratio<u64>; 2]> {
    if n_reliable == 0 || n_unreliable == 0 {
        return Err(HanError::Domain("class weights need both classes present".into()));
    }
    let n = n_reliable + n_unreliable;
    Ok([Ratio::new(n, 2 * n_reliable), Ratio::new(n, 2 * n_unreliable)])
}

pub fn ratio_to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Class weights as configured: derived from the training labels, or given.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightsRepr", into = "WeightsRepr")]
pub enum ClassWeights {
    #[default]
    Auto,
    Explicit([f64; 2]),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WeightsRepr {
    Name(String),
    Values([f64; 2]),
}

impl TryFrom<WeightsRepr> for ClassWeights {
    type Error = String;
    fn try_from(r: WeightsRepr) -> std::result::Result<Self, String> {
        match r {
            WeightsRepr::Name(s) if s == "auto" => Ok(ClassWeights::Auto),
            WeightsRepr::Name(s) => Err(format!("class_weights must be \"auto\" or [w0, w1], got {s:?}")),
            WeightsRepr::Values(v) => Ok(ClassWeights::Explicit(v)),
        }
    }
}

impl From<ClassWeights> for WeightsRepr {
    fn from(w: ClassWeights) -> Self {
        match w {
            ClassWeights::Auto => WeightsRepr::Name("auto".into()),
            ClassWeights::Explicit(v) => WeightsRepr::Values(v),
        }
    }
}

impl ClassWeights {
    pub fn resolve(&self, labels: &[Label]) -> Result<[f64; 2]> {
        match *self {
            ClassWeights::Auto => Ok(auto_class_weights(labels)?.map(ratio_to_f64)),
            ClassWeights::Explicit(w) => {
                if w.iter().all(|x| x.is_finite() && *x > 0.0) {
                    Ok(w)
                } else {
                    Err(HanError::Config(format!("class weights must be positive, got {w:?}")))
                }
            }
        }
    }
}

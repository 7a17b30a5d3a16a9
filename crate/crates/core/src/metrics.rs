//! Threshold metrics, rank-based ROC-AUC and ROC / precision-recall curves.
//!
//! The positive class is [`Label::Unreliable`].

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{HanError, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    /// `tp / (tp + fp)`, or 0 when nothing is predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    /// `tp / (tp + fn)`, or 0 when there are no positives.
    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check_inputs(scores: &[f64], labels: &[Label]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(HanError::Domain(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(HanError::Domain(format!("non-finite score {s}")));
    }
    Ok(())
}

fn check_both_classes(labels: &[Label]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l == Label::Unreliable).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(HanError::Domain("ROC statistics need both classes present".into()));
    }
    Ok((pos, neg))
}

/// Confusion counts where `score >= threshold` predicts unreliable.
pub fn confusion_at(scores: &[f64], labels: &[Label], threshold: f64) -> Result<Confusion> {
    check_inputs(scores, labels)?;
    let mut c = Confusion::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, Label::Unreliable) => c.tp += 1,
            (true, Label::Reliable) => c.fp += 1,
            (false, Label::Reliable) => c.tn += 1,
            (false, Label::Unreliable) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Mann-Whitney statistic: the probability that a random positive outscores
/// a random negative, ties counted half. Computed from midranks.
pub fn roc_auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    check_inputs(scores, labels)?;
    let (pos, neg) = check_both_classes(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of 2·rank over positives; doubling keeps midranks integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share the midrank (i + j + 2) / 2.
        let twice_mid = (i + j + 2) as u128;
        let group_pos = order[i..=j].iter().filter(|&&k| labels[k] == Label::Unreliable).count() as u128;
        twice_rank_sum += twice_mid * group_pos;
        i = j + 1;
    }
    let pos = pos as u128;
    let twice_u = twice_rank_sum - pos * (pos + 1);
    Ok(twice_u as f64 / (2.0 * pos as f64 * neg as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Roc,
    Pr,
}

impl std::str::FromStr for CurveKind {
    type Err = HanError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "roc" => Ok(CurveKind::Roc),
            "pr" => Ok(CurveKind::Pr),
            other => Err(HanError::Config(format!("unknown curve kind {other:?}"))),
        }
    }
}

/// Curve points, one per distinct score threshold plus the two sentinels.
///
/// ROC points are `(fpr, tpr)` from `(0, 0)` to `(1, 1)`. PR points are
/// `(recall, precision)`; the leading sentinel is `(0, 1)`.
pub fn curve_points(scores: &[f64], labels: &[Label], kind: CurveKind) -> Result<Vec<(f64, f64)>> {
    check_inputs(scores, labels)?;
    let (pos, neg) = check_both_classes(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = vec![match kind {
        CurveKind::Roc => (0.0, 0.0),
        CurveKind::Pr => (0.0, 1.0),
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            match labels[order[i]] {
                Label::Unreliable => tp += 1,
                Label::Reliable => fp += 1,
            }
            i += 1;
        }
        out.push(match kind {
            CurveKind::Roc => (fp as f64 / neg as f64, tp as f64 / pos as f64),
            CurveKind::Pr => (tp as f64 / pos as f64, tp as f64 / (tp + fp) as f64),
        });
    }
    Ok(out)
}

/// Trapezoidal area under a polyline given as `(x, y)` pairs.
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Formats points as `x,y` lines under a header.
pub fn points_to_csv(points: &[(f64, f64)], header: (&str, &str)) -> String {
    let mut s = format!("{},{}\n", header.0, header.1);
    for (x, y) in points {
        let _ = writeln!(s, "{x},{y}");
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub n: usize,
    pub threshold: f64,
    pub confusion: Confusion,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
    /// `None` when only one class is present.
    pub roc_auc: Option<f64>,
    pub roc_points: Vec<(f64, f64)>,
    pub pr_points: Vec<(f64, f64)>,
}

impl EvalResult {
    pub fn roc_csv(&self) -> String {
        points_to_csv(&self.roc_points, ("fpr", "tpr"))
    }

    pub fn pr_csv(&self) -> String {
        points_to_csv(&self.pr_points, ("recall", "precision"))
    }
}

/// Threshold metrics plus curves. Single-class inputs still get threshold
/// metrics; the rank statistics are left empty.
pub fn evaluate(scores: &[f64], labels: &[Label], threshold: f64) -> Result<EvalResult> {
    let confusion = confusion_at(scores, labels, threshold)?;
    let both = check_both_classes(labels).is_ok();
    let (roc_auc, roc_points, pr_points) = if both {
        (
            Some(roc_auc(scores, labels)?),
            curve_points(scores, labels, CurveKind::Roc)?,
            curve_points(scores, labels, CurveKind::Pr)?,
        )
    } else {
        (None, Vec::new(), Vec::new())
    };
    Ok(EvalResult {
        n: scores.len(),
        threshold,
        confusion,
        precision: confusion.precision(),
        recall: confusion.recall(),
        accuracy: confusion.accuracy(),
        f1: confusion.f1(),
        roc_auc,
        roc_points,
        pr_points,
    })
}

//! Training objective terms: logarithmic GIoU box loss, the standard
//! classification / mask / association losses, and their unweighted sum.

use serde::{Deserialize, Serialize};

use crate::depth::SoftMask;
use crate::error::{Error, Result};
use crate::mask::{box_giou, BBox, BinaryMask};

/// Lower bound on `(1 + GIoU) / 2` before taking the logarithm.
pub const GIOU_LOG_FLOOR: f64 = 1e-12;

/// Probability clamp used by [`mask_loss`].
pub const MASK_EPS: f64 = 1e-7;

/// `-ln((1 + GIoU) / 2)`, with the argument floored at [`GIOU_LOG_FLOOR`].
pub fn giou_loss(pred: &BBox, target: &BBox) -> Result<f64> {
    let g = box_giou(pred, target)?;
    Ok(log_giou_loss(g))
}

/// Loss as a function of a precomputed GIoU value.
pub fn log_giou_loss(giou: f64) -> f64 {
    let arg = ((1.0 + giou) / 2.0).max(GIOU_LOG_FLOOR);
    -arg.ln()
}

/// Cross-entropy against a probability vector.
pub fn cls_loss(scores: &[f64], true_class: usize) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InvalidDistribution("no class scores".into()));
    }
    if scores.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(Error::InvalidDistribution(
            "scores must lie in [0, 1]".into(),
        ));
    }
    let sum: f64 = scores.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidDistribution(format!(
            "scores sum to {sum}, expected 1"
        )));
    }
    let Some(&p) = scores.get(true_class) else {
        return Err(Error::InvalidDistribution(format!(
            "class index {true_class} out of range for {} classes",
            scores.len()
        )));
    };
    Ok(-p.ln())
}

/// Mean per-pixel binary cross-entropy with predictions clamped to
/// `[MASK_EPS, 1 - MASK_EPS]`.
pub fn mask_loss(pred: &SoftMask, target: &BinaryMask) -> Result<f64> {
    let p = pred.plane();
    if p.dims() != target.dims() {
        return Err(Error::DimensionMismatch {
            expected: target.dims(),
            actual: p.dims(),
        });
    }
    let total: f64 = p
        .values()
        .iter()
        .zip(target.data())
        .map(|(&v, &t)| {
            let v = v.clamp(MASK_EPS, 1.0 - MASK_EPS);
            if t {
                -v.ln()
            } else {
                -(1.0 - v).ln()
            }
        })
        .sum();
    Ok(total / p.values().len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingPair {
    pub anchor: Vec<f64>,
    pub other: Vec<f64>,
    pub same_identity: bool,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Mean contrastive hinge: same-identity pairs pay their distance, different
/// identities pay `max(0, margin - distance)`.
pub fn track_loss(pairs: &[EmbeddingPair], margin: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("track_loss needs at least one pair".into()));
    }
    if !(margin > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "margin must be positive, got {margin}"
        )));
    }
    let mut total = 0.0;
    for pair in pairs {
        if pair.anchor.len() != pair.other.len() {
            return Err(Error::EmbeddingLength {
                expected: pair.anchor.len(),
                actual: pair.other.len(),
            });
        }
        let d = euclidean(&pair.anchor, &pair.other);
        total += if pair.same_identity {
            d.max(0.0)
        } else {
            (margin - d).max(0.0)
        };
    }
    Ok(total / pairs.len() as f64)
}

/// Per-term weights; the objective is a plain sum unless configured otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub box_: f64,
    pub cls: f64,
    pub mask: f64,
    pub track: f64,
    pub depth: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            box_: 1.0,
            cls: 1.0,
            mask: 1.0,
            track: 1.0,
            depth: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossComponents {
    #[serde(rename = "box")]
    pub box_: f64,
    pub cls: f64,
    pub mask: f64,
    pub track: f64,
    /// Supplied externally; zero when the depth head is not trained.
    #[serde(default)]
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    #[serde(rename = "box")]
    pub box_: f64,
    pub cls: f64,
    pub mask: f64,
    pub track: f64,
    pub depth: f64,
    pub total: f64,
}

pub fn total_loss(components: &LossComponents) -> Result<LossBreakdown> {
    total_loss_weighted(components, &LossWeights::default())
}

pub fn total_loss_weighted(c: &LossComponents, w: &LossWeights) -> Result<LossBreakdown> {
    let named = [
        ("box", c.box_),
        ("cls", c.cls),
        ("mask", c.mask),
        ("track", c.track),
        ("depth", c.depth),
    ];
    for (name, v) in named {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("{name} loss is {v}")));
        }
        if v < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{name} loss is negative ({v})"
            )));
        }
    }
    let total = w.box_ * c.box_ + w.cls * c.cls + w.mask * c.mask + w.track * c.track + w.depth * c.depth;
    Ok(LossBreakdown {
        box_: c.box_,
        cls: c.cls,
        mask: c.mask,
        track: c.track,
        depth: c.depth,
        total,
    })
}

/// Central-difference gradient of `f` at `x`.
pub fn numeric_gradient<F>(f: F, x: &[f64], eps: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step must be positive, got {eps}"
        )));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + eps;
        let hi = f(&probe);
        probe[i] = x[i] - eps;
        let lo = f(&probe);
        probe[i] = x[i];
        if !hi.is_finite() || !lo.is_finite() {
            return Err(Error::NonFinite(format!(
                "function evaluation near coordinate {i}"
            )));
        }
        grad.push((hi - lo) / (2.0 * eps));
    }
    Ok(grad)
}

//! Mask-based tracking metrics: sMOTSA, MOTSA, ID switches and HOTA.
//!
//! All ratios are fractions; percentages are a presentation concern.

mod assignment;
mod hota;
mod report;

pub use assignment::max_weight_assignment;
pub use hota::{compute_hota, hota_from_frames, HotaAlpha, HotaResult, HOTA_ALPHAS};
pub use report::{evaluate, resolve_overlaps, ClassReport, EvalOptions, MetricsReport, ReportMeta};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{check_disjoint, ClassId, SequenceAnnotation};
use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// CLEAR-style correspondences of one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMatching {
    pub frame: usize,
    /// `(gt_track_id, pred_track_id, iou)` with `iou > 0.5`.
    pub pairs: Vec<(u32, u32, f64)>,
    pub unmatched_gt: Vec<u32>,
    pub unmatched_pred: Vec<u32>,
}

/// Decoded masks of one class in one frame plus their pairwise IoU.
#[derive(Debug, Clone)]
pub struct FrameData {
    pub frame: usize,
    pub gt_ids: Vec<u32>,
    pub pred_ids: Vec<u32>,
    /// `iou[g][p]`.
    pub iou: Vec<Vec<f64>>,
}

/// Pairwise IoU of two sets of mutually disjoint masks, from a single pass
/// over pixel owners.
pub fn pairwise_iou(frame: usize, gt: &[(u32, BinaryMask)], pred: &[(u32, BinaryMask)]) -> Result<Vec<Vec<f64>>> {
    check_disjoint(frame, gt)?;
    check_disjoint(frame, pred)?;
    let Some(dims) = gt.first().or(pred.first()).map(|(_, m)| m.dims()) else {
        return Ok(Vec::new());
    };
    for (_, m) in gt.iter().chain(pred) {
        if m.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: m.dims(),
            });
        }
    }
    let n = dims.0 * dims.1;
    let owners = |set: &[(u32, BinaryMask)]| {
        let mut own = vec![usize::MAX; n];
        for (i, (_, m)) in set.iter().enumerate() {
            for (p, &v) in m.data().iter().enumerate() {
                if v {
                    own[p] = i;
                }
            }
        }
        own
    };
    let (go, po) = (owners(gt), owners(pred));
    let mut inter = vec![vec![0usize; pred.len()]; gt.len()];
    let mut gt_area = vec![0usize; gt.len()];
    let mut pred_area = vec![0usize; pred.len()];
    for (&g, &p) in go.iter().zip(&po) {
        if g != usize::MAX {
            gt_area[g] += 1;
        }
        if p != usize::MAX {
            pred_area[p] += 1;
        }
        if g != usize::MAX && p != usize::MAX {
            inter[g][p] += 1;
        }
    }
    Ok(inter
        .iter()
        .enumerate()
        .map(|(g, row)| {
            row.iter()
                .enumerate()
                .map(|(p, &i)| {
                    let union = gt_area[g] + pred_area[p] - i;
                    if union == 0 {
                        0.0
                    } else {
                        i as f64 / union as f64
                    }
                })
                .collect()
        })
        .collect())
}

/// Matches masks with IoU strictly above 0.5. Under the non-overlap
/// precondition such a partner is unique on both sides.
pub fn match_frame(frame: usize, gt: &[(u32, BinaryMask)], pred: &[(u32, BinaryMask)]) -> Result<FrameMatching> {
    let iou = pairwise_iou(frame, gt, pred)?;
    let gt_ids: Vec<u32> = gt.iter().map(|(id, _)| *id).collect();
    let pred_ids: Vec<u32> = pred.iter().map(|(id, _)| *id).collect();
    Ok(clear_match(&FrameData {
        frame,
        gt_ids,
        pred_ids,
        iou,
    }))
}

fn clear_match(fd: &FrameData) -> FrameMatching {
    let mut pairs = Vec::new();
    let mut pred_taken = vec![false; fd.pred_ids.len()];
    let mut unmatched_gt = Vec::new();
    for (g, row) in fd.iou.iter().enumerate() {
        match row.iter().position(|&v| v > 0.5) {
            Some(p) => {
                pred_taken[p] = true;
                pairs.push((fd.gt_ids[g], fd.pred_ids[p], row[p]));
            }
            None => unmatched_gt.push(fd.gt_ids[g]),
        }
    }
    let unmatched_pred = fd
        .pred_ids
        .iter()
        .zip(&pred_taken)
        .filter(|(_, &t)| !t)
        .map(|(&id, _)| id)
        .collect();
    FrameMatching {
        frame: fd.frame,
        pairs,
        unmatched_gt,
        unmatched_pred,
    }
}

/// Frame-by-frame data for `class`, over the ground truth's frame range.
pub fn collect_frames(gt: &SequenceAnnotation, pred: &SequenceAnnotation, class: ClassId) -> Result<Vec<FrameData>> {
    let has_pred = !pred.frames.is_empty();
    if has_pred && !gt.frames.is_empty() && (gt.image_height, gt.image_width) != (pred.image_height, pred.image_width) {
        return Err(Error::DimensionMismatch {
            expected: (gt.image_height, gt.image_width),
            actual: (pred.image_height, pred.image_width),
        });
    }
    if let Some((&last, _)) = pred.frames.iter().next_back() {
        if last >= gt.frame_count {
            return Err(Error::FrameRange(format!(
                "prediction has frame {last} but ground truth covers {} frames",
                gt.frame_count
            )));
        }
    }
    let decode = |ann: &SequenceAnnotation, f: usize| -> Result<Vec<(u32, BinaryMask)>> {
        ann.objects(f)
            .iter()
            .filter(|o| o.class_id == class)
            .map(|o| Ok((o.track_id, o.mask.decode()?)))
            .collect()
    };
    let mut out = Vec::with_capacity(gt.frame_count);
    for f in 0..gt.frame_count {
        let g = decode(gt, f)?;
        let p = decode(pred, f)?;
        let iou = pairwise_iou(f, &g, &p)?;
        out.push(FrameData {
            frame: f,
            gt_ids: g.into_iter().map(|(id, _)| id).collect(),
            pred_ids: p.into_iter().map(|(id, _)| id).collect(),
            iou,
        });
    }
    Ok(out)
}

/// CLEAR-style counts and accuracies for one class. `hota` is filled in by
/// [`evaluate`]; ratios are `None` when there is no ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotsMetrics {
    pub smotsa: Option<f64>,
    pub motsa: Option<f64>,
    pub hota: Option<f64>,
    pub ids: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub soft_tp: f64,
    pub num_gt: usize,
}

impl MotsMetrics {
    fn from_counts(tp: usize, fp: usize, fn_: usize, ids: usize, soft_tp: f64) -> MotsMetrics {
        let num_gt = tp + fn_;
        let ratio = |num: f64| (num_gt > 0).then(|| num / num_gt as f64);
        MotsMetrics {
            motsa: ratio(tp as f64 - fp as f64 - ids as f64),
            smotsa: ratio(soft_tp - fp as f64 - ids as f64),
            hota: None,
            ids,
            tp,
            fp,
            fn_,
            soft_tp,
            num_gt,
        }
    }
}

pub fn mots_from_frames(frames: &[FrameData]) -> MotsMetrics {
    let (mut tp, mut fp, mut fn_, mut ids) = (0usize, 0usize, 0usize, 0usize);
    let mut soft_tp = 0.0;
    let mut last_match: HashMap<u32, u32> = HashMap::new();
    for fd in frames {
        let m = clear_match(fd);
        tp += m.pairs.len();
        fp += m.unmatched_pred.len();
        fn_ += m.unmatched_gt.len();
        for &(g, p, iou) in &m.pairs {
            soft_tp += iou;
            if let Some(prev) = last_match.insert(g, p) {
                if prev != p {
                    ids += 1;
                }
            }
        }
    }
    MotsMetrics::from_counts(tp, fp, fn_, ids, soft_tp)
}

pub fn compute_mots_metrics(gt: &SequenceAnnotation, pred: &SequenceAnnotation, class: ClassId) -> Result<MotsMetrics> {
    Ok(mots_from_frames(&collect_frames(gt, pred, class)?))
}

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{collect_frames, max_weight_assignment, FrameData};
use crate::dataset::{ClassId, SequenceAnnotation};
use crate::error::Result;

/// Localization thresholds 0.05, 0.10, ..., 0.95.
pub const HOTA_ALPHAS: [f64; 19] = {
    let mut a = [0.0; 19];
    let mut i = 0;
    while i < 19 {
        a[i] = (i + 1) as f64 / 20.0;
        i += 1;
    }
    a
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotaAlpha {
    pub alpha: f64,
    pub deta: f64,
    pub assa: f64,
    pub hota: f64,
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub fp: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotaResult {
    /// Mean over the α grid; `None` when there is no ground truth.
    pub hota: Option<f64>,
    pub per_alpha: Vec<HotaAlpha>,
}

fn index_of(map: &mut HashMap<u32, usize>, id: u32) -> usize {
    let n = map.len();
    *map.entry(id).or_insert(n)
}

pub fn hota_from_frames(frames: &[FrameData]) -> HotaResult {
    let mut gt_ix: HashMap<u32, usize> = HashMap::new();
    let mut pr_ix: HashMap<u32, usize> = HashMap::new();
    let local: Vec<(Vec<usize>, Vec<usize>)> = frames
        .iter()
        .map(|fd| {
            (
                fd.gt_ids.iter().map(|&id| index_of(&mut gt_ix, id)).collect(),
                fd.pred_ids.iter().map(|&id| index_of(&mut pr_ix, id)).collect(),
            )
        })
        .collect();
    let (ng, np) = (gt_ix.len(), pr_ix.len());

    // Track-level alignment from soft per-frame overlaps.
    let mut potential = vec![vec![0.0; np]; ng];
    let mut gt_count = vec![0usize; ng];
    let mut pr_count = vec![0usize; np];
    for (fd, (gi, pi)) in frames.iter().zip(&local) {
        let col_sum: Vec<f64> = (0..pi.len()).map(|p| fd.iou.iter().map(|r| r[p]).sum()).collect();
        for (g, row) in fd.iou.iter().enumerate() {
            let row_sum: f64 = row.iter().sum();
            for (p, &s) in row.iter().enumerate() {
                let denom = row_sum + col_sum[p] - s;
                if denom > 0.0 {
                    potential[gi[g]][pi[p]] += s / denom;
                }
            }
        }
        gi.iter().for_each(|&g| gt_count[g] += 1);
        pi.iter().for_each(|&p| pr_count[p] += 1);
    }
    let alignment: Vec<Vec<f64>> = potential
        .iter()
        .enumerate()
        .map(|(g, row)| {
            row.iter()
                .enumerate()
                .map(|(p, &v)| {
                    let d = (gt_count[g] + pr_count[p]) as f64 - v;
                    if d > 0.0 {
                        v / d
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();

    let total_gt: usize = gt_count.iter().sum();
    let total_pr: usize = pr_count.iter().sum();

    let per_alpha: Vec<HotaAlpha> = HOTA_ALPHAS
        .iter()
        .map(|&alpha| {
            let mut matches = vec![vec![0usize; np]; ng];
            let mut tp = 0usize;
            for (fd, (gi, pi)) in frames.iter().zip(&local) {
                if gi.is_empty() || pi.is_empty() {
                    continue;
                }
                // Pair count dominates: the secondary term sums to at most
                // min(n, m) < big.
                let big = gi.len().min(pi.len()) as f64 + 1.0;
                let w: Vec<Vec<f64>> = fd
                    .iou
                    .iter()
                    .enumerate()
                    .map(|(g, row)| {
                        row.iter()
                            .enumerate()
                            .map(|(p, &s)| {
                                if s >= alpha {
                                    big + alignment[gi[g]][pi[p]] * s
                                } else {
                                    0.0
                                }
                            })
                            .collect()
                    })
                    .collect();
                for (g, p) in max_weight_assignment(&w) {
                    if fd.iou[g][p] >= alpha {
                        matches[gi[g]][pi[p]] += 1;
                        tp += 1;
                    }
                }
            }
            let fn_ = total_gt - tp;
            let fp = total_pr - tp;
            let mut ass_sum = 0.0;
            for (g, row) in matches.iter().enumerate() {
                for (p, &m) in row.iter().enumerate() {
                    if m > 0 {
                        let m = m as f64;
                        ass_sum += m * m / ((gt_count[g] + pr_count[p]) as f64 - m);
                    }
                }
            }
            let assa = if tp > 0 { ass_sum / tp as f64 } else { 0.0 };
            let denom = tp + fn_ + fp;
            let deta = if denom > 0 { tp as f64 / denom as f64 } else { 0.0 };
            HotaAlpha {
                alpha,
                deta,
                assa,
                hota: (deta * assa).sqrt(),
                tp,
                fn_,
                fp,
            }
        })
        .collect();

    let hota = (total_gt > 0).then(|| per_alpha.iter().map(|a| a.hota).sum::<f64>() / HOTA_ALPHAS.len() as f64);
    HotaResult { hota, per_alpha }
}

pub fn compute_hota(gt: &SequenceAnnotation, pred: &SequenceAnnotation, class: ClassId) -> Result<HotaResult> {
    Ok(hota_from_frames(&collect_frames(gt, pred, class)?))
}

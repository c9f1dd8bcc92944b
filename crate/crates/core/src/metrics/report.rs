use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{collect_frames, hota_from_frames, mots_from_frames, HotaAlpha, HotaResult, MotsMetrics, HOTA_ALPHAS};
use crate::dataset::{AnnotatedObject, ClassId, SequenceAnnotation};
use crate::depth::{paste_roi, PlacedMask, Roi};
use crate::error::{Error, Result};
use crate::mask::rle_encode;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// Resolve overlapping predictions instead of rejecting them.
    pub resolve_overlaps: bool,
}

/// One report section. Ratios are `null` when there is no ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassReport {
    pub smotsa: Option<f64>,
    pub motsa: Option<f64>,
    pub hota: Option<f64>,
    pub ids: usize,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub soft_tp: f64,
}

impl ClassReport {
    fn new(m: &MotsMetrics, hota: Option<f64>) -> ClassReport {
        ClassReport {
            smotsa: m.smotsa,
            motsa: m.motsa,
            hota,
            ids: m.ids,
            tp: m.tp,
            fp: m.fp,
            fn_: m.fn_,
            soft_tp: m.soft_tp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub tool: String,
    pub version: String,
}

impl Default for ReportMeta {
    fn default() -> Self {
        ReportMeta {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Keyed by class name.
    #[serde(flatten)]
    pub classes: BTreeMap<String, ClassReport>,
    pub aggregate: ClassReport,
    pub meta: ReportMeta,
}

fn fmt_ratio(v: Option<f64>, percent: bool) -> String {
    match v {
        None => "n/a".into(),
        Some(x) if percent => format!("{:.2}", 100.0 * x),
        Some(x) => format!("{x:.4}"),
    }
}

impl MetricsReport {
    /// Plain-text table, one row per class plus the aggregate.
    pub fn render_text(&self, percent: bool) -> String {
        let header = ["class", "sMOTSA", "MOTSA", "HOTA", "IDS", "TP", "FP", "FN"];
        let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        let sections = self.classes.iter().map(|(k, v)| (k.as_str(), v)).chain([("aggregate", &self.aggregate)]);
        for (name, r) in sections {
            rows.push(vec![
                name.to_string(),
                fmt_ratio(r.smotsa, percent),
                fmt_ratio(r.motsa, percent),
                fmt_ratio(r.hota, percent),
                r.ids.to_string(),
                r.tp.to_string(),
                r.fp.to_string(),
                r.fn_.to_string(),
            ]);
        }
        let widths: Vec<usize> = (0..header.len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for r in &rows {
            let cells: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (s, &w))| if i == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

/// Applies the pasting rule to every frame: with no scores in an annotation
/// the lower object id wins a contested pixel. Emptied objects are dropped.
pub fn resolve_overlaps(ann: &SequenceAnnotation) -> Result<SequenceAnnotation> {
    let mut out = SequenceAnnotation::new(ann.sequence_id.clone(), ann.frame_count, ann.image_height, ann.image_width);
    out.ignore = ann.ignore.clone();
    let full = Roi {
        row: 0,
        col: 0,
        height: ann.image_height,
        width: ann.image_width,
    };
    for &frame in ann.frames.keys() {
        let decoded = ann.decode_frame(frame)?;
        let placed: Vec<PlacedMask> = decoded
            .iter()
            .map(|(o, m)| PlacedMask {
                id: o.object_id(),
                score: 0.0,
                roi: full,
                mask: m.clone(),
            })
            .collect();
        let pasted = paste_roi(ann.image_height, ann.image_width, &placed)?;
        for ((o, _), m) in decoded.into_iter().zip(pasted) {
            if !m.is_empty() {
                out.push(
                    frame,
                    AnnotatedObject {
                        mask: rle_encode(&m),
                        ..o
                    },
                );
            }
        }
    }
    out.frame_count = ann.frame_count;
    Ok(out)
}

/// Pools per-sequence HOTA: detection counts add up, association accuracy
/// is weighted by true positives.
fn combine_hota(parts: &[HotaResult]) -> Option<f64> {
    let per_alpha: Vec<HotaAlpha> = (0..HOTA_ALPHAS.len())
        .map(|i| {
            let (mut tp, mut fn_, mut fp, mut ass) = (0usize, 0usize, 0usize, 0.0);
            for p in parts {
                let a = &p.per_alpha[i];
                tp += a.tp;
                fn_ += a.fn_;
                fp += a.fp;
                ass += a.assa * a.tp as f64;
            }
            let assa = if tp > 0 { ass / tp as f64 } else { 0.0 };
            let denom = tp + fn_ + fp;
            let deta = if denom > 0 { tp as f64 / denom as f64 } else { 0.0 };
            HotaAlpha {
                alpha: HOTA_ALPHAS[i],
                deta,
                assa,
                hota: (deta * assa).sqrt(),
                tp,
                fn_,
                fp,
            }
        })
        .collect();
    let num_gt = per_alpha[0].tp + per_alpha[0].fn_;
    (num_gt > 0).then(|| per_alpha.iter().map(|a| a.hota).sum::<f64>() / HOTA_ALPHAS.len() as f64)
}

fn sum_mots(parts: &[MotsMetrics]) -> MotsMetrics {
    let (mut tp, mut fp, mut fn_, mut ids, mut soft) = (0, 0, 0, 0, 0.0);
    for m in parts {
        tp += m.tp;
        fp += m.fp;
        fn_ += m.fn_;
        ids += m.ids;
        soft += m.soft_tp;
    }
    MotsMetrics::from_counts(tp, fp, fn_, ids, soft)
}

/// Evaluates paired `(gt, pred)` sequences for the requested classes.
/// Sequence and class work items run in parallel.
pub fn evaluate(
    pairs: &[(SequenceAnnotation, SequenceAnnotation)],
    classes: &[ClassId],
    opts: &EvalOptions,
) -> Result<MetricsReport> {
    for &c in classes {
        if !c.is_evaluated() {
            return Err(Error::UnknownClass(c.to_string()));
        }
    }
    for (gt, pred) in pairs {
        if gt.sequence_id != pred.sequence_id {
            return Err(Error::InvalidAnnotation(format!(
                "ground truth {} paired with prediction {}",
                gt.sequence_id, pred.sequence_id
            )));
        }
    }
    let resolved: Vec<SequenceAnnotation> = if opts.resolve_overlaps {
        pairs.par_iter().map(|(_, p)| resolve_overlaps(p)).collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let items: Vec<(usize, usize)> = (0..classes.len()).flat_map(|c| (0..pairs.len()).map(move |s| (c, s))).collect();
    let results: Vec<(MotsMetrics, HotaResult)> = items
        .par_iter()
        .map(|&(c, s)| {
            let gt = &pairs[s].0;
            let pred = if opts.resolve_overlaps { &resolved[s] } else { &pairs[s].1 };
            let frames = collect_frames(gt, pred, classes[c])?;
            Ok((mots_from_frames(&frames), hota_from_frames(&frames)))
        })
        .collect::<Result<_>>()?;

    let mut sections = BTreeMap::new();
    let mut class_mots = Vec::new();
    let mut class_hota = Vec::new();
    for (ci, &class) in classes.iter().enumerate() {
        let part = &results[ci * pairs.len()..(ci + 1) * pairs.len()];
        let mots: Vec<MotsMetrics> = part.iter().map(|r| r.0.clone()).collect();
        let hotas: Vec<HotaResult> = part.iter().map(|r| r.1.clone()).collect();
        let m = sum_mots(&mots);
        let h = combine_hota(&hotas);
        let name = class.name().expect("evaluated classes have names");
        sections.insert(name.to_string(), ClassReport::new(&m, h));
        class_mots.push(m);
        class_hota.extend(h);
    }
    let agg = sum_mots(&class_mots);
    let agg_hota = (!class_hota.is_empty()).then(|| class_hota.iter().sum::<f64>() / class_hota.len() as f64);
    Ok(MetricsReport {
        classes: sections,
        aggregate: ClassReport::new(&agg, agg_hota),
        meta: ReportMeta::default(),
    })
}

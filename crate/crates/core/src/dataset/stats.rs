use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ClassId, SequenceAnnotation};
use crate::error::{Error, Result};
use crate::mask::mask_to_bbox;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistogramConfig {
    pub bins: usize,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        Self { bins: 16 }
    }
}

/// Uniform-width histogram; `edges.len() == counts.len() + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Bins spanning the observed range; the maximum lands in the last bin.
    pub fn from_samples(samples: &[f64], bins: usize) -> Histogram {
        let bins = bins.max(1);
        if samples.is_empty() {
            return Histogram {
                edges: Vec::new(),
                counts: Vec::new(),
            };
        }
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            hi = lo + 1.0;
        }
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
        let mut counts = vec![0usize; bins];
        for &s in samples {
            let b = (((s - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Histogram { edges, counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Per-sequence partial statistics. Merging is associative and commutative
/// up to sample order, which binning ignores.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SequenceStats {
    pub video_clips: usize,
    pub total_frames: usize,
    pub identities: usize,
    pub instances: usize,
    pub box_sizes: Vec<f64>,
    pub track_lengths: Vec<f64>,
}

impl SequenceStats {
    pub fn of(ann: &SequenceAnnotation) -> Result<SequenceStats> {
        let mut spans: BTreeMap<(ClassId, u32), (usize, usize)> = BTreeMap::new();
        let mut box_sizes = Vec::with_capacity(ann.instance_count());
        for (&frame, objs) in &ann.frames {
            for o in objs {
                let b = mask_to_bbox(&o.mask.decode()?);
                box_sizes.push((b.width() * b.height()).sqrt());
                spans
                    .entry((o.class_id, o.track_id))
                    .and_modify(|s| {
                        s.0 = s.0.min(frame);
                        s.1 = s.1.max(frame);
                    })
                    .or_insert((frame, frame));
            }
        }
        Ok(SequenceStats {
            video_clips: 1,
            total_frames: ann.frame_count,
            identities: spans.len(),
            instances: box_sizes.len(),
            box_sizes,
            track_lengths: spans.values().map(|(a, b)| (b - a + 1) as f64).collect(),
        })
    }

    pub fn merge(mut self, other: SequenceStats) -> SequenceStats {
        self.video_clips += other.video_clips;
        self.total_frames += other.total_frames;
        self.identities += other.identities;
        self.instances += other.instances;
        self.box_sizes.extend(other.box_sizes);
        self.track_lengths.extend(other.track_lengths);
        self
    }

    pub fn finish(&self, config: &HistogramConfig) -> StatsReport {
        let instances_per_frame = if self.total_frames == 0 {
            0.0
        } else {
            self.instances as f64 / self.total_frames as f64
        };
        StatsReport {
            video_clips: self.video_clips,
            total_frames: self.total_frames,
            identities: self.identities,
            instances: self.instances,
            instances_per_frame,
            size_histogram: Histogram::from_samples(&self.box_sizes, config.bins),
            track_length_histogram: Histogram::from_samples(&self.track_lengths, config.bins),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub video_clips: usize,
    pub total_frames: usize,
    pub identities: usize,
    pub instances: usize,
    pub instances_per_frame: f64,
    /// Over `sqrt(w * h)` of each instance's mask box.
    pub size_histogram: Histogram,
    /// Over `last - first + 1` frames of each identity.
    pub track_length_histogram: Histogram,
}

impl StatsReport {
    pub const TABLE_HEADER: [&'static str; 6] = [
        "Datasets",
        "Video clip",
        "Total frames",
        "Identities",
        "Instances",
        "Ins./Fr.",
    ];

    /// The cells of one table row, counts abbreviated as in `8K` / `6.3K`.
    pub fn table_cells(&self, name: &str) -> [String; 6] {
        [
            name.to_string(),
            format_compact_count(self.video_clips),
            format_compact_count(self.total_frames),
            format_compact_count(self.identities),
            format_compact_count(self.instances),
            format!("{:.2}", self.instances_per_frame),
        ]
    }

    /// Header plus one row, column aligned.
    pub fn render_table(&self, name: &str) -> String {
        let header = Self::TABLE_HEADER.map(String::from);
        let row = self.table_cells(name);
        let widths: Vec<usize> = header
            .iter()
            .zip(&row)
            .map(|(a, b)| a.len().max(b.len()))
            .collect();
        let line = |cells: &[String; 6]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join(" | ")
        };
        let rule = widths
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .join("-|-");
        format!("{}\n{}\n{}\n", line(&header), rule, line(&row))
    }
}

/// `749`, `8K`, `6.3K`, `38K`, `129K`: raw below one thousand, one decimal
/// below ten thousand, whole thousands above.
pub fn format_compact_count(n: usize) -> String {
    if n < 1000 {
        return n.to_string();
    }
    let k = n as f64 / 1000.0;
    if n < 10_000 {
        let s = format!("{k:.1}");
        let s = s.strip_suffix(".0").unwrap_or(&s);
        return format!("{s}K");
    }
    format!("{}K", k.round() as u64)
}

pub fn dataset_stats(anns: &[SequenceAnnotation], config: &HistogramConfig) -> Result<StatsReport> {
    if anns.is_empty() {
        return Err(Error::EmptyInput("no sequences given".into()));
    }
    let merged = anns
        .par_iter()
        .map(SequenceStats::of)
        .try_reduce(SequenceStats::default, |a, b| Ok(a.merge(b)))?;
    Ok(merged.finish(config))
}

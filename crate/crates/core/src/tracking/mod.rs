//! Embedding-distance association of per-frame detections into tracks, and
//! the labeler pipeline that chains refinement, pasting and association.

mod interchange;
mod pipeline;

pub use interchange::{read_detections, write_detections, DetectionFile, DetectionRecord, FrameRecord};
pub use pipeline::{run_labeler_pipeline, PipelineOutput};

use std::collections::BTreeMap;

use crate::dataset::ClassId;
use crate::error::{Error, Result};
use crate::loss::euclidean;
use crate::mask::{mask_to_bbox, BBox, RleMask};

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame: usize,
    pub bbox: BBox,
    pub class_id: ClassId,
    pub score: f64,
    pub mask: RleMask,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub track_id: u32,
    pub class_id: ClassId,
    /// Strictly increasing frames, one detection each.
    pub detections: Vec<Detection>,
}

impl Track {
    pub fn first_frame(&self) -> usize {
        self.detections[0].frame
    }

    pub fn last_frame(&self) -> usize {
        self.detections[self.detections.len() - 1].frame
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssocParams {
    /// Largest embedding distance accepted as a match (inclusive).
    pub dist_threshold: f64,
    /// Largest frame gap over which a track can be continued.
    pub max_gap: usize,
    pub same_class_only: bool,
}

impl Default for AssocParams {
    fn default() -> Self {
        Self {
            dist_threshold: 0.5,
            max_gap: 1,
            same_class_only: true,
        }
    }
}

impl AssocParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dist_threshold > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dist_threshold must be positive, got {}",
                self.dist_threshold
            )));
        }
        if self.max_gap == 0 {
            return Err(Error::InvalidParameter("max_gap must be at least 1".into()));
        }
        Ok(())
    }
}

/// Checks the per-frame grouping, frame order, scores and embedding lengths.
fn check_frames(frames: &[Vec<Detection>]) -> Result<()> {
    let mut dim: Option<usize> = None;
    let mut prev: Option<usize> = None;
    for list in frames {
        let Some(first) = list.first() else { continue };
        if let Some(p) = prev {
            if first.frame <= p {
                return Err(Error::FrameRange(format!(
                    "detection frames must increase: {} follows {p}",
                    first.frame
                )));
            }
        }
        prev = Some(first.frame);
        for d in list {
            if d.frame != first.frame {
                return Err(Error::FrameRange(format!(
                    "frame group {} contains a detection of frame {}",
                    first.frame, d.frame
                )));
            }
            if !(0.0..=1.0).contains(&d.score) {
                return Err(Error::InvalidParameter(format!(
                    "score {} outside [0, 1] in frame {}",
                    d.score, d.frame
                )));
            }
            match dim {
                None => dim = Some(d.embedding.len()),
                Some(n) if n != d.embedding.len() => {
                    return Err(Error::EmbeddingLength {
                        expected: n,
                        actual: d.embedding.len(),
                    })
                }
                Some(_) => {}
            }
        }
    }
    Ok(())
}

/// Greedy association; returns the track id given to every detection,
/// indexed like `frames`.
pub fn associate_ids(frames: &[Vec<Detection>], params: &AssocParams) -> Result<Vec<Vec<u32>>> {
    params.validate()?;
    check_frames(frames)?;

    struct Live<'a> {
        id: u32,
        class_id: ClassId,
        last_frame: usize,
        embedding: &'a [f64],
    }
    let mut live: Vec<Live> = Vec::new();
    let mut next_id = 1u32;
    let mut out = Vec::with_capacity(frames.len());

    for list in frames {
        let mut ids = vec![0u32; list.len()];
        let Some(first) = list.first() else {
            out.push(ids);
            continue;
        };
        let frame = first.frame;

        // (distance, track id, detection index, live index)
        let mut candidates: Vec<(f64, u32, usize, usize)> = Vec::new();
        for (li, t) in live.iter().enumerate() {
            if frame - t.last_frame > params.max_gap {
                continue;
            }
            for (di, d) in list.iter().enumerate() {
                if params.same_class_only && d.class_id != t.class_id {
                    continue;
                }
                let dist = euclidean(t.embedding, &d.embedding);
                if dist <= params.dist_threshold {
                    candidates.push((dist, t.id, di, li));
                }
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut track_used = vec![false; live.len()];
        let mut det_used = vec![false; list.len()];
        for &(_, id, di, li) in &candidates {
            if track_used[li] || det_used[di] {
                continue;
            }
            track_used[li] = true;
            det_used[di] = true;
            ids[di] = id;
            live[li].last_frame = frame;
            live[li].embedding = &list[di].embedding;
        }

        let mut fresh: Vec<usize> = (0..list.len()).filter(|&i| !det_used[i]).collect();
        fresh.sort_by(|&a, &b| list[b].score.total_cmp(&list[a].score).then(a.cmp(&b)));
        for di in fresh {
            ids[di] = next_id;
            live.push(Live {
                id: next_id,
                class_id: list[di].class_id,
                last_frame: frame,
                embedding: &list[di].embedding,
            });
            next_id += 1;
        }
        out.push(ids);
    }
    Ok(out)
}

/// Tracks ordered by id.
pub fn associate(frames: &[Vec<Detection>], params: &AssocParams) -> Result<Vec<Track>> {
    let ids = associate_ids(frames, params)?;
    Ok(build_tracks(frames, &ids))
}

/// Groups detections by assigned id; ids need not be contiguous.
pub(crate) fn build_tracks(frames: &[Vec<Detection>], ids: &[Vec<u32>]) -> Vec<Track> {
    let mut tracks: BTreeMap<u32, Track> = BTreeMap::new();
    for (list, list_ids) in frames.iter().zip(ids) {
        for (d, &id) in list.iter().zip(list_ids) {
            tracks
                .entry(id)
                .or_insert_with(|| Track {
                    track_id: id,
                    class_id: d.class_id,
                    detections: Vec::new(),
                })
                .detections
                .push(d.clone());
        }
    }
    tracks.into_values().collect()
}

/// Tight box of the detection's mask, or its own box when the mask is empty.
pub fn mask_guided_box(det: &Detection) -> Result<BBox> {
    let mask = det.mask.decode()?;
    if mask.is_empty() {
        return Ok(det.bbox);
    }
    Ok(mask_to_bbox(&mask))
}

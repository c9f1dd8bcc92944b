//! Sequence annotations, KITTI-MOTS text I/O, frame subsampling and dataset
//! statistics.

mod mots_txt;
mod stats;

pub use mots_txt::{parse_mots_txt, read_mots_txt, read_mots_txt_with, write_mots_txt, ParseOptions};
pub use stats::{
    dataset_stats, format_compact_count, Histogram, HistogramConfig, SequenceStats, StatsReport,
};

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, RleMask};

/// Object category as used in the MOTS text format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub u32);

impl ClassId {
    pub const CAR: ClassId = ClassId(1);
    pub const PEDESTRIAN: ClassId = ClassId(2);
    /// Class written on ignore-region lines.
    pub const IGNORE: ClassId = ClassId(10);

    pub fn is_evaluated(self) -> bool {
        self == Self::CAR || self == Self::PEDESTRIAN
    }

    pub fn name(self) -> Option<&'static str> {
        match self {
            Self::CAR => Some("car"),
            Self::PEDESTRIAN => Some("pedestrian"),
            _ => None,
        }
    }

    pub fn from_name(name: &str) -> Result<ClassId> {
        match name.trim().to_ascii_lowercase().as_str() {
            "car" | "cars" | "1" => Ok(Self::CAR),
            "pedestrian" | "pedestrians" | "2" => Ok(Self::PEDESTRIAN),
            other => Err(Error::UnknownClass(other.to_string())),
        }
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.name() {
            Some(n) => f.write_str(n),
            None => write!(f, "class-{}", self.0),
        }
    }
}

/// Object id used on ignore-region lines.
pub const IGNORE_OBJECT_ID: u32 = 10000;

/// Largest per-class instance id representable as `class * 1000 + id`.
pub const MAX_TRACK_ID: u32 = 999;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedObject {
    pub track_id: u32,
    pub class_id: ClassId,
    pub mask: RleMask,
}

impl AnnotatedObject {
    pub fn object_id(&self) -> u32 {
        self.class_id.0 * 1000 + self.track_id
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IgnoreRegion {
    pub class_id: ClassId,
    pub mask: RleMask,
}

/// Ground-truth or predicted masks of one sequence.
///
/// Identities are `(class_id, track_id)`; within a frame masks never overlap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceAnnotation {
    pub sequence_id: String,
    pub frame_count: usize,
    pub image_height: usize,
    pub image_width: usize,
    /// Objects per frame, sorted by object id.
    pub frames: BTreeMap<usize, Vec<AnnotatedObject>>,
    pub ignore: BTreeMap<usize, Vec<IgnoreRegion>>,
}

impl SequenceAnnotation {
    pub fn new(sequence_id: impl Into<String>, frame_count: usize, image_height: usize, image_width: usize) -> Self {
        Self {
            sequence_id: sequence_id.into(),
            frame_count,
            image_height,
            image_width,
            frames: BTreeMap::new(),
            ignore: BTreeMap::new(),
        }
    }

    pub fn objects(&self, frame: usize) -> &[AnnotatedObject] {
        self.frames.get(&frame).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Appends an object and keeps the frame sorted by object id.
    pub fn push(&mut self, frame: usize, object: AnnotatedObject) {
        let objs = self.frames.entry(frame).or_default();
        objs.push(object);
        objs.sort_by_key(AnnotatedObject::object_id);
        self.frame_count = self.frame_count.max(frame + 1);
    }

    pub fn push_ignore(&mut self, frame: usize, region: IgnoreRegion) {
        self.ignore.entry(frame).or_default().push(region);
        self.frame_count = self.frame_count.max(frame + 1);
    }

    pub fn instance_count(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    /// Only the objects of `class`, ignore regions dropped.
    pub fn filter_class(&self, class: ClassId) -> SequenceAnnotation {
        let mut out = SequenceAnnotation::new(
            self.sequence_id.clone(),
            self.frame_count,
            self.image_height,
            self.image_width,
        );
        for (&f, objs) in &self.frames {
            let kept: Vec<_> = objs.iter().filter(|o| o.class_id == class).cloned().collect();
            if !kept.is_empty() {
                out.frames.insert(f, kept);
            }
        }
        out
    }

    /// Decoded masks of one frame, in stored order.
    pub fn decode_frame(&self, frame: usize) -> Result<Vec<(AnnotatedObject, BinaryMask)>> {
        self.objects(frame)
            .iter()
            .map(|o| Ok((o.clone(), o.mask.decode()?)))
            .collect()
    }

    /// Checks dimensions, id ranges, uniqueness and per-frame non-overlap.
    pub fn validate(&self) -> Result<()> {
        self.check(true)
    }

    /// [`validate`](Self::validate) without the non-overlap check.
    pub fn validate_structure(&self) -> Result<()> {
        self.check(false)
    }

    fn check(&self, disjoint: bool) -> Result<()> {
        let dims = (self.image_height, self.image_width);
        for (&frame, objs) in &self.frames {
            if frame >= self.frame_count {
                return Err(Error::InvalidAnnotation(format!(
                    "frame {frame} outside frame count {}",
                    self.frame_count
                )));
            }
            let mut seen = HashSet::new();
            let mut decoded: Vec<(u32, BinaryMask)> = Vec::with_capacity(objs.len());
            for o in objs {
                if !o.class_id.is_evaluated() {
                    return Err(Error::InvalidAnnotation(format!(
                        "frame {frame}: class {} is not car or pedestrian",
                        o.class_id.0
                    )));
                }
                if o.track_id == 0 || o.track_id > MAX_TRACK_ID {
                    return Err(Error::InvalidAnnotation(format!(
                        "frame {frame}: track id {} outside 1..={MAX_TRACK_ID}",
                        o.track_id
                    )));
                }
                if !seen.insert(o.object_id()) {
                    return Err(Error::InvalidAnnotation(format!(
                        "frame {frame}: duplicate object id {}",
                        o.object_id()
                    )));
                }
                if (o.mask.height, o.mask.width) != dims {
                    return Err(Error::DimensionMismatch {
                        expected: dims,
                        actual: (o.mask.height, o.mask.width),
                    });
                }
                decoded.push((o.object_id(), o.mask.decode()?));
            }
            if disjoint {
                check_disjoint(frame, &decoded)?;
            }
        }
        for (&frame, regions) in &self.ignore {
            if frame >= self.frame_count {
                return Err(Error::InvalidAnnotation(format!(
                    "ignore region in frame {frame} outside frame count {}",
                    self.frame_count
                )));
            }
            for r in regions {
                if (r.mask.height, r.mask.width) != dims {
                    return Err(Error::DimensionMismatch {
                        expected: dims,
                        actual: (r.mask.height, r.mask.width),
                    });
                }
                r.mask.runs()?;
            }
        }
        Ok(())
    }
}

/// Fails with [`Error::Overlap`] naming the first overlapping pair.
pub fn check_disjoint<Id: fmt::Display>(frame: usize, masks: &[(Id, BinaryMask)]) -> Result<()> {
    let Some((_, first)) = masks.first() else {
        return Ok(());
    };
    let mut owner: Vec<Option<usize>> = vec![None; first.data().len()];
    for (i, (_, m)) in masks.iter().enumerate() {
        for (p, &v) in m.data().iter().enumerate() {
            if !v {
                continue;
            }
            if let Some(j) = owner[p] {
                return Err(Error::Overlap {
                    frame,
                    first: masks[j].0.to_string(),
                    second: masks[i].0.to_string(),
                });
            }
            owner[p] = Some(i);
        }
    }
    Ok(())
}

/// Keeps frames whose index is a multiple of `stride`, renumbered densely.
pub fn subsample_every_n(ann: &SequenceAnnotation, stride: usize) -> Result<SequenceAnnotation> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be at least 1".into()));
    }
    let keep = |f: usize| f.is_multiple_of(stride).then_some(f / stride);
    let mut out = SequenceAnnotation::new(
        ann.sequence_id.clone(),
        ann.frame_count.div_ceil(stride),
        ann.image_height,
        ann.image_width,
    );
    for (&f, objs) in &ann.frames {
        if let Some(nf) = keep(f) {
            out.frames.insert(nf, objs.clone());
        }
    }
    for (&f, regions) in &ann.ignore {
        if let Some(nf) = keep(f) {
            out.ignore.insert(nf, regions.clone());
        }
    }
    Ok(out)
}

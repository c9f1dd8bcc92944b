//! JSON detection interchange files (schema: `schemas/detections.schema.json`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Detection;
use crate::dataset::ClassId;
use crate::error::{Error, Result};
use crate::mask::{BBox, RleMask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionFile {
    pub sequence_id: String,
    pub image_height: usize,
    pub image_width: usize,
    /// Frames in the sequence; defaults to one past the last listed frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_count: Option<usize>,
    pub frames: Vec<FrameRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub frame: usize,
    pub detections: Vec<DetectionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub bbox: BBox,
    pub class_id: ClassId,
    pub score: f64,
    pub mask: RleMask,
    pub embedding: Vec<f64>,
}

impl DetectionFile {
    pub fn from_frames(
        sequence_id: impl Into<String>,
        image_height: usize,
        image_width: usize,
        frame_count: Option<usize>,
        frames: &[Vec<Detection>],
    ) -> DetectionFile {
        let frames = frames
            .iter()
            .filter_map(|list| {
                let frame = list.first()?.frame;
                Some(FrameRecord {
                    frame,
                    detections: list
                        .iter()
                        .map(|d| DetectionRecord {
                            bbox: d.bbox,
                            class_id: d.class_id,
                            score: d.score,
                            mask: d.mask.clone(),
                            embedding: d.embedding.clone(),
                        })
                        .collect(),
                })
            })
            .collect();
        DetectionFile {
            sequence_id: sequence_id.into(),
            image_height,
            image_width,
            frame_count,
            frames,
        }
    }

    pub fn frame_count(&self) -> usize {
        self.frame_count
            .unwrap_or_else(|| self.frames.last().map_or(0, |f| f.frame + 1))
    }

    /// Semantic checks beyond the JSON structure.
    pub fn validate(&self) -> Result<()> {
        let dims = (self.image_height, self.image_width);
        if dims.0 == 0 || dims.1 == 0 {
            return Err(Error::Format("image dimensions must be positive".into()));
        }
        let mut emb_len: Option<usize> = None;
        let mut prev: Option<usize> = None;
        for fr in &self.frames {
            if prev.is_some_and(|p| fr.frame <= p) {
                return Err(Error::Format(format!(
                    "frames must be strictly increasing, {} follows {}",
                    fr.frame,
                    prev.unwrap()
                )));
            }
            prev = Some(fr.frame);
            for (i, d) in fr.detections.iter().enumerate() {
                let at = |m: String| Error::Format(format!("frame {} detection {i}: {m}", fr.frame));
                if !d.class_id.is_evaluated() {
                    return Err(at(format!("class_id {} is not 1 or 2", d.class_id.0)));
                }
                if !(0.0..=1.0).contains(&d.score) {
                    return Err(at(format!("score {} outside [0, 1]", d.score)));
                }
                if (d.mask.height, d.mask.width) != dims {
                    return Err(at(format!(
                        "mask is {}x{}, frames are {}x{}",
                        d.mask.height, d.mask.width, dims.0, dims.1
                    )));
                }
                d.mask.runs().map_err(|e| at(e.to_string()))?;
                if d.embedding.iter().any(|v| !v.is_finite()) {
                    return Err(at("non-finite embedding value".into()));
                }
                match emb_len {
                    None => emb_len = Some(d.embedding.len()),
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
        if let Some(n) = self.frame_count {
            if prev.is_some_and(|p| p >= n) {
                return Err(Error::Format(format!(
                    "frame {} outside frame_count {n}",
                    prev.unwrap()
                )));
            }
        }
        Ok(())
    }

    /// Detections grouped per listed frame.
    pub fn to_frames(&self) -> Vec<Vec<Detection>> {
        self.frames
            .iter()
            .map(|fr| {
                fr.detections
                    .iter()
                    .map(|d| Detection {
                        frame: fr.frame,
                        bbox: d.bbox,
                        class_id: d.class_id,
                        score: d.score,
                        mask: d.mask.clone(),
                        embedding: d.embedding.clone(),
                    })
                    .collect()
            })
            .collect()
    }
}

pub fn read_detections(path: impl AsRef<Path>) -> Result<DetectionFile> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let file: DetectionFile = serde_json::from_str(&text)?;
    file.validate()?;
    Ok(file)
}

pub fn write_detections(path: impl AsRef<Path>, file: &DetectionFile) -> Result<()> {
    let text = serde_json::to_string_pretty(file)?;
    crate::fsutil::write_atomic(path.as_ref(), text.as_bytes())
}

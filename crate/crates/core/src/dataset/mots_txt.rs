//! KITTI-MOTS text format, one object per line:
//!
//! ```text
//! frame obj_id class_id img_height img_width rle_counts
//! ```
//!
//! `obj_id = class_id * 1000 + instance_id`; `obj_id == 10000` marks an
//! ignore region.

use std::path::Path;

use super::{AnnotatedObject, ClassId, IgnoreRegion, SequenceAnnotation, IGNORE_OBJECT_ID};
use crate::error::{Error, Result};
use crate::mask::RleMask;

#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    pub sequence_id: String,
    /// Overrides the frame count derived from the highest frame index.
    pub frame_count: Option<usize>,
    /// Accept overlapping masks within a frame (to be resolved later).
    pub allow_overlaps: bool,
}

pub fn parse_mots_txt<S: AsRef<str>>(
    lines: impl IntoIterator<Item = S>,
    opts: &ParseOptions,
) -> Result<SequenceAnnotation> {
    let mut ann = SequenceAnnotation::new(opts.sequence_id.clone(), 0, 0, 0);
    let mut dims: Option<(usize, usize)> = None;

    for (idx, line) in lines.into_iter().enumerate() {
        let lineno = idx + 1;
        let line = line.as_ref().trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            line: lineno,
            message,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(err(format!("expected 6 fields, found {}", fields.len())));
        }
        let int = |i: usize, name: &str| -> Result<usize> {
            fields[i]
                .parse::<usize>()
                .map_err(|_| err(format!("{name} {:?} is not a non-negative integer", fields[i])))
        };
        let frame = int(0, "frame")?;
        let obj_id = int(1, "object id")? as u32;
        let class_id = ClassId(int(2, "class id")? as u32);
        let height = int(3, "image height")?;
        let width = int(4, "image width")?;
        if height == 0 || width == 0 {
            return Err(err("image dimensions must be positive".into()));
        }
        match dims {
            None => dims = Some((height, width)),
            Some(d) if d != (height, width) => {
                return Err(err(format!(
                    "inconsistent image dimensions {height}x{width}, earlier lines use {}x{}",
                    d.0, d.1
                )))
            }
            Some(_) => {}
        }
        let mask = RleMask {
            height,
            width,
            counts: fields[5].to_string(),
        };
        mask.runs().map_err(|e| err(e.to_string()))?;

        if obj_id == IGNORE_OBJECT_ID {
            ann.push_ignore(frame, IgnoreRegion { class_id, mask });
            continue;
        }
        if obj_id / 1000 != class_id.0 {
            return Err(err(format!(
                "object id {obj_id} does not encode class {}",
                class_id.0
            )));
        }
        let track_id = obj_id % 1000;
        if track_id == 0 {
            return Err(err(format!("object id {obj_id} has instance id 0")));
        }
        ann.push(
            frame,
            AnnotatedObject {
                track_id,
                class_id,
                mask,
            },
        );
    }

    if let Some((h, w)) = dims {
        ann.image_height = h;
        ann.image_width = w;
    }
    if let Some(n) = opts.frame_count {
        if n < ann.frame_count {
            return Err(Error::FrameRange(format!(
                "annotation reaches frame {} but frame count is {n}",
                ann.frame_count - 1
            )));
        }
        ann.frame_count = n;
    }
    if opts.allow_overlaps {
        ann.validate_structure()?;
    } else {
        ann.validate()?;
    }
    Ok(ann)
}

/// Lines sorted by `(frame, obj_id)`, ignore regions last within a frame.
pub fn write_mots_txt(ann: &SequenceAnnotation) -> Vec<String> {
    let mut rows: Vec<(usize, u32, String)> = Vec::new();
    for (&frame, objs) in &ann.frames {
        for o in objs {
            rows.push((
                frame,
                o.object_id(),
                format!(
                    "{frame} {} {} {} {} {}",
                    o.object_id(),
                    o.class_id.0,
                    o.mask.height,
                    o.mask.width,
                    o.mask.counts
                ),
            ));
        }
    }
    for (&frame, regions) in &ann.ignore {
        for r in regions {
            rows.push((
                frame,
                IGNORE_OBJECT_ID,
                format!(
                    "{frame} {IGNORE_OBJECT_ID} {} {} {} {}",
                    r.class_id.0, r.mask.height, r.mask.width, r.mask.counts
                ),
            ));
        }
    }
    // stable: several ignore regions in one frame keep their order
    rows.sort_by_key(|(f, id, _)| (*f, *id));
    rows.into_iter().map(|(_, _, s)| s).collect()
}

pub fn read_mots_txt(path: impl AsRef<Path>) -> Result<SequenceAnnotation> {
    read_mots_txt_with(path, ParseOptions::default())
}

/// Reads with explicit options; an empty `sequence_id` is taken from the
/// file stem.
pub fn read_mots_txt_with(path: impl AsRef<Path>, mut opts: ParseOptions) -> Result<SequenceAnnotation> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    if opts.sequence_id.is_empty() {
        opts.sequence_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
    }
    parse_mots_txt(text.lines(), &opts)
}

use rayon::prelude::*;

use super::{associate_ids, build_tracks, AssocParams, Detection, Track};
use crate::dataset::{AnnotatedObject, SequenceAnnotation};
use crate::depth::{paste_roi, refine_mask, DepthMap, DgmParams, PlacedMask, SoftMask};
use crate::error::{Error, Result};
use crate::mask::{mask_to_bbox, rle_encode, BBox};

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub annotation: SequenceAnnotation,
    /// Tracks carrying the refined, pasted masks and their mask-guided boxes.
    pub tracks: Vec<Track>,
}

/// Refines every detection inside its box, resolves overlaps, associates
/// across frames and emits the resulting annotation.
///
/// `depth` is looked up by frame index. Detections whose refined mask ends
/// up empty after pasting are dropped from the output.
pub fn run_labeler_pipeline(
    sequence_id: &str,
    image_dims: (usize, usize),
    frame_count: usize,
    frames: &[Vec<Detection>],
    depth: &(dyn Fn(usize) -> Result<DepthMap> + Sync),
    dgm: &DgmParams,
    assoc: &AssocParams,
) -> Result<PipelineOutput> {
    dgm.validate()?;
    let (height, width) = image_dims;

    let refined: Vec<Vec<(crate::depth::Roi, crate::mask::BinaryMask)>> = frames
        .par_iter()
        .map(|list| {
            let Some(first) = list.first() else {
                return Ok(Vec::new());
            };
            let d = depth(first.frame)?;
            if d.plane().dims() != image_dims {
                return Err(Error::DimensionMismatch {
                    expected: image_dims,
                    actual: d.plane().dims(),
                });
            }
            list.iter()
                .map(|det| {
                    let coarse = det.mask.decode()?;
                    if coarse.dims() != image_dims {
                        return Err(Error::DimensionMismatch {
                            expected: image_dims,
                            actual: coarse.dims(),
                        });
                    }
                    let base = SoftMask::from_binary(&coarse);
                    let r = refine_mask(&base, &d, &det.bbox, dgm)?;
                    Ok((r.roi, r.binarize(dgm)?))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let ids = associate_ids(frames, assoc)?;

    let mut annotation = SequenceAnnotation::new(sequence_id, frame_count, height, width);
    let mut kept_frames: Vec<Vec<Detection>> = Vec::with_capacity(frames.len());
    let mut kept_ids: Vec<Vec<u32>> = Vec::with_capacity(frames.len());
    for ((list, list_ids), rois) in frames.iter().zip(&ids).zip(refined) {
        let placed: Vec<PlacedMask> = rois
            .into_iter()
            .zip(list.iter().zip(list_ids))
            .map(|((roi, mask), (det, &id))| PlacedMask {
                id,
                score: det.score,
                roi,
                mask,
            })
            .collect();
        let pasted = paste_roi(height, width, &placed)?;

        let mut dets = Vec::new();
        let mut dids = Vec::new();
        for ((det, &id), mask) in list.iter().zip(list_ids).zip(pasted) {
            if mask.is_empty() {
                continue;
            }
            let rle = rle_encode(&mask);
            let bbox: BBox = mask_to_bbox(&mask);
            annotation.push(
                det.frame,
                AnnotatedObject {
                    track_id: id,
                    class_id: det.class_id,
                    mask: rle.clone(),
                },
            );
            dets.push(Detection {
                bbox,
                mask: rle,
                ..det.clone()
            });
            dids.push(id);
        }
        kept_frames.push(dets);
        kept_ids.push(dids);
    }
    annotation.validate()?;

    let tracks = build_tracks(&kept_frames, &kept_ids);
    Ok(PipelineOutput { annotation, tracks })
}

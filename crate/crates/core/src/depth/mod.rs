//! Depth-granularity mask refinement.
//!
//! A coarse soft mask is cropped to its detection box together with the
//! depth map, both crops are split into a `k x k` grid, every depth tile is
//! min-max normalized on its own, and each mask tile is modulated as
//! `sigmoid(mask * normalized_depth)`. The modulated tiles are stitched back
//! into a mask covering the box.

mod pfm;
mod plane;

pub use pfm::{read_pfm, write_pfm};
pub use plane::{Patch, Plane, Roi};

use crate::error::{Error, Result};
use crate::mask::{BBox, BinaryMask};

/// Relative per-pixel depth. Larger values are nearer to the camera; only the
/// ordering within a tile matters.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap(Plane);

impl DepthMap {
    pub fn new(plane: Plane) -> Result<Self> {
        if let Some(v) = plane.values().iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("depth value {v}")));
        }
        Ok(Self(plane))
    }

    pub fn plane(&self) -> &Plane {
        &self.0
    }

    pub fn into_plane(self) -> Plane {
        self.0
    }

    pub fn crop(&self, bbox: &BBox) -> Result<Patch> {
        crop_roi(&self.0, bbox)
    }
}

/// Per-pixel foreground probability in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMask(Plane);

impl SoftMask {
    pub fn new(plane: Plane) -> Result<Self> {
        if let Some(v) = plane
            .values()
            .iter()
            .find(|v| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InvalidParameter(format!(
                "soft mask value {v} outside [0, 1]"
            )));
        }
        Ok(Self(plane))
    }

    /// 1.0 on foreground, 0.0 elsewhere.
    pub fn from_binary(mask: &BinaryMask) -> Self {
        let values = mask
            .data()
            .iter()
            .map(|&v| if v { 1.0 } else { 0.0 })
            .collect();
        Self(Plane::new(mask.height(), mask.width(), values).expect("matching length"))
    }

    pub fn plane(&self) -> &Plane {
        &self.0
    }

    pub fn into_plane(self) -> Plane {
        self.0
    }

    pub fn crop(&self, bbox: &BBox) -> Result<Patch> {
        crop_roi(&self.0, bbox)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgmParams {
    /// Sub-regions per axis.
    pub k: usize,
    /// Foreground threshold on `mask * normalized_depth`.
    pub tau_prod: f64,
}

impl Default for DgmParams {
    fn default() -> Self {
        Self {
            k: 2,
            tau_prod: 0.25,
        }
    }
}

impl DgmParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if !(self.tau_prod > 0.0 && self.tau_prod < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tau_prod must lie in (0, 1), got {}",
                self.tau_prod
            )));
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Crops the integer-pixel extent of `bbox` (rounded outward, clipped).
pub fn crop_roi(plane: &Plane, bbox: &BBox) -> Result<Patch> {
    let roi = Roi::from_bbox(bbox, plane.height(), plane.width())?;
    Ok(Patch {
        roi,
        plane: plane.window(&roi),
    })
}

/// `k x k` grid over a `height x width` area, in row-major grid order. Each
/// axis is split by floor division and the last row/column of the grid
/// absorbs the remainder; tiles can be empty when `k` exceeds a dimension.
pub fn tile_grid(height: usize, width: usize, k: usize) -> Vec<Roi> {
    let k = k.max(1);
    let split = |len: usize, i: usize| {
        let step = len / k;
        let start = i * step;
        let end = if i + 1 == k { len } else { start + step };
        (start, end - start)
    };
    let mut tiles = Vec::with_capacity(k * k);
    for i in 0..k {
        let (row, height) = split(height, i);
        for j in 0..k {
            let (col, width) = split(width, j);
            tiles.push(Roi {
                row,
                col,
                height,
                width,
            });
        }
    }
    tiles
}

/// Splits a patch into its `k x k` tiles. Returned ROIs are in the same
/// (image) coordinates as `patch.roi`.
pub fn subdivide(patch: &Patch, k: usize) -> Vec<Patch> {
    tile_grid(patch.roi.height, patch.roi.width, k)
        .into_iter()
        .map(|local| Patch {
            plane: patch.plane.window(&local),
            roi: Roi {
                row: patch.roi.row + local.row,
                col: patch.roi.col + local.col,
                ..local
            },
        })
        .collect()
}

/// Min-max normalization to `[0, 1]`; a constant tile maps to all ones.
pub fn normalize_depth(sub: &Plane) -> Plane {
    let (lo, hi) = sub
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    let values = if range > 0.0 {
        sub.values().iter().map(|&v| (v - lo) / range).collect()
    } else {
        vec![1.0; sub.values().len()]
    };
    Plane::new(sub.height(), sub.width(), values).expect("same shape")
}

/// Elementwise `sigmoid(base * depth_norm)`.
pub fn blend(base: &Plane, depth_norm: &Plane) -> Result<Plane> {
    check_shape(base, depth_norm)?;
    let values = base
        .values()
        .iter()
        .zip(depth_norm.values())
        .map(|(&b, &d)| sigmoid(b * d))
        .collect();
    Plane::new(base.height(), base.width(), values)
}

/// Foreground where `base * depth_norm >= tau_prod`.
pub fn binarize(base: &Plane, depth_norm: &Plane, params: &DgmParams) -> Result<BinaryMask> {
    check_shape(base, depth_norm)?;
    let data = base
        .values()
        .iter()
        .zip(depth_norm.values())
        .map(|(&b, &d)| b * d >= params.tau_prod)
        .collect();
    BinaryMask::new(base.height(), base.width(), data)
}

fn check_shape(a: &Plane, b: &Plane) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            expected: a.dims(),
            actual: b.dims(),
        });
    }
    Ok(())
}

/// Result of refining one instance inside its box.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedRoi {
    /// Placement in the frame.
    pub roi: Roi,
    /// `sigmoid(base * depth_norm)` over the box.
    pub refined: Plane,
    /// The cropped base mask.
    pub base: Plane,
    /// Tile-wise normalized depth over the box.
    pub depth_norm: Plane,
}

impl RefinedRoi {
    pub fn binarize(&self, params: &DgmParams) -> Result<BinaryMask> {
        binarize(&self.base, &self.depth_norm, params)
    }
}

pub fn refine_mask(
    base: &SoftMask,
    depth: &DepthMap,
    bbox: &BBox,
    params: &DgmParams,
) -> Result<RefinedRoi> {
    params.validate()?;
    check_shape(base.plane(), depth.plane())?;
    let base_patch = base.crop(bbox)?;
    let depth_patch = depth.crop(bbox)?;
    let roi = base_patch.roi;

    let mut refined = Plane::filled(roi.height, roi.width, 0.0);
    let mut depth_norm = Plane::filled(roi.height, roi.width, 0.0);
    for tile in tile_grid(roi.height, roi.width, params.k) {
        if tile.is_empty() {
            continue;
        }
        let b = base_patch.plane.window(&tile);
        let d = normalize_depth(&depth_patch.plane.window(&tile));
        let m = blend(&b, &d)?;
        refined.blit(&m, tile.row, tile.col);
        depth_norm.blit(&d, tile.row, tile.col);
    }
    Ok(RefinedRoi {
        roi,
        refined,
        base: base_patch.plane,
        depth_norm,
    })
}

/// One instance to be placed on a frame canvas.
#[derive(Debug, Clone)]
pub struct PlacedMask {
    pub id: u32,
    pub score: f64,
    pub roi: Roi,
    /// Mask over `roi` (dimensions `roi.height x roi.width`).
    pub mask: BinaryMask,
}

/// Places every mask at its offset on a `height x width` frame. Pixels
/// claimed by several instances go to the highest score, ties to the lower
/// id. Output order follows the input order.
pub fn paste_roi(height: usize, width: usize, instances: &[PlacedMask]) -> Result<Vec<BinaryMask>> {
    for inst in instances {
        let r = &inst.roi;
        if r.row + r.height > height || r.col + r.width > width {
            return Err(Error::InvalidParameter(format!(
                "roi {r:?} of instance {} exceeds {height}x{width} canvas",
                inst.id
            )));
        }
        if inst.mask.dims() != (r.height, r.width) {
            return Err(Error::DimensionMismatch {
                expected: (r.height, r.width),
                actual: inst.mask.dims(),
            });
        }
    }

    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.sort_by(|&a, &b| {
        let (ia, ib) = (&instances[a], &instances[b]);
        ib.score
            .total_cmp(&ia.score)
            .then(ia.id.cmp(&ib.id))
            .then(a.cmp(&b))
    });

    let mut claimed = vec![false; height * width];
    let mut out: Vec<BinaryMask> = (0..instances.len())
        .map(|_| BinaryMask::empty(height, width))
        .collect::<Result<_>>()?;
    for idx in order {
        let inst = &instances[idx];
        for r in 0..inst.roi.height {
            for c in 0..inst.roi.width {
                if !inst.mask.get(r, c) {
                    continue;
                }
                let (fr, fc) = (inst.roi.row + r, inst.roi.col + c);
                let slot = &mut claimed[fr * width + fc];
                if !*slot {
                    *slot = true;
                    out[idx].set(fr, fc, true);
                }
            }
        }
    }
    Ok(out)
}

//! Flow-guided feature alignment and temporal aggregation.
//!
//! Features of an earlier frame are backward-warped onto the current frame
//! (each output pixel `p` reads the source at `p + flow(p)` with bilinear
//! interpolation and edge clamping) and then averaged with the current
//! frame's features.

mod flo;

pub use flo::{read_flo, write_flo};

use crate::error::{Error, Result};

/// Default number of frames (current included) that take part in aggregation.
pub const DEFAULT_TEMPORAL_RANGE: usize = 3;

/// Channel-major feature tensor: value `(ch, r, c)` is at
/// `ch * height * width + r * width + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidParameter(format!(
                "feature map shape must be positive, got {channels}x{height}x{width}"
            )));
        }
        if values.len() != channels * height * width {
            return Err(Error::InvalidParameter(format!(
                "expected {} feature values, got {}",
                channels * height * width,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("feature value".into()));
        }
        Ok(Self {
            channels,
            height,
            width,
            values,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, ch: usize, row: usize, col: usize) -> f64 {
        self.values[(ch * self.height + row) * self.width + col]
    }
}

/// Per-pixel displacement, in pixels, from a current-frame pixel to where it
/// is read in the source frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    height: usize,
    width: usize,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl FlowField {
    pub fn new(height: usize, width: usize, dx: Vec<f64>, dy: Vec<f64>) -> Result<Self> {
        if dx.len() != height * width || dy.len() != height * width {
            return Err(Error::InvalidParameter(format!(
                "flow components must hold {} values",
                height * width
            )));
        }
        if dx.iter().chain(&dy).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("flow value".into()));
        }
        Ok(Self {
            height,
            width,
            dx,
            dy,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            dx: vec![0.0; height * width],
            dy: vec![0.0; height * width],
        }
    }

    pub fn constant(height: usize, width: usize, dx: f64, dy: f64) -> Result<Self> {
        Self::new(height, width, vec![dx; height * width], vec![dy; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> (f64, f64) {
        let i = row * self.width + col;
        (self.dx[i], self.dy[i])
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    pub fn dy(&self) -> &[f64] {
        &self.dy
    }
}

fn sample_bilinear(plane: &[f64], height: usize, width: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (width - 1) as f64);
    let y = y.clamp(0.0, (height - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let at = |r: usize, c: usize| plane[r * width + c];
    let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
    let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Backward warp of `source` along `flow`.
pub fn warp(source: &FeatureMap, flow: &FlowField) -> Result<FeatureMap> {
    if (source.height, source.width) != flow.dims() {
        return Err(Error::DimensionMismatch {
            expected: (source.height, source.width),
            actual: flow.dims(),
        });
    }
    let (h, w) = (source.height, source.width);
    let mut out = Vec::with_capacity(source.values.len());
    for ch in 0..source.channels {
        let plane = &source.values[ch * h * w..(ch + 1) * h * w];
        for r in 0..h {
            for c in 0..w {
                let (dx, dy) = flow.at(r, c);
                out.push(sample_bilinear(plane, h, w, c as f64 + dx, r as f64 + dy));
            }
        }
    }
    FeatureMap::new(source.channels, h, w, out)
}

/// Uniform mean of the current map and the warped neighbours.
pub fn aggregate(current: &FeatureMap, warped: &[FeatureMap]) -> Result<FeatureMap> {
    if warped.len() + 1 > DEFAULT_TEMPORAL_RANGE {
        return Err(Error::InvalidParameter(format!(
            "temporal range {DEFAULT_TEMPORAL_RANGE} allows at most {} warped maps, got {}",
            DEFAULT_TEMPORAL_RANGE - 1,
            warped.len()
        )));
    }
    let weights = vec![1.0; warped.len() + 1];
    aggregate_weighted(current, warped, &weights)
}

/// Weighted mean; `weights[0]` applies to `current`, the rest to `warped` in
/// order. Weights must be non-negative with a positive sum.
pub fn aggregate_weighted(
    current: &FeatureMap,
    warped: &[FeatureMap],
    weights: &[f64],
) -> Result<FeatureMap> {
    if weights.len() != warped.len() + 1 {
        return Err(Error::InvalidParameter(format!(
            "expected {} weights, got {}",
            warped.len() + 1,
            weights.len()
        )));
    }
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter("weights must be finite and non-negative".into()));
    }
    let norm: f64 = weights.iter().sum();
    if norm <= 0.0 {
        return Err(Error::InvalidParameter("weights sum to zero".into()));
    }
    for m in warped {
        if m.shape() != current.shape() {
            return Err(Error::DimensionMismatch {
                expected: (current.height, current.width),
                actual: (m.height, m.width),
            });
        }
    }
    if warped.is_empty() {
        return Ok(current.clone());
    }
    let maps = std::iter::once(current).chain(warped);
    let mut acc = vec![0.0; current.values.len()];
    for (m, &wt) in maps.zip(weights) {
        for (a, &v) in acc.iter_mut().zip(&m.values) {
            *a += wt * v;
        }
    }
    // identical inputs must average back to themselves exactly
    let first = &current.values;
    let all_same = warped.iter().all(|m| m.values == *first);
    let values = if all_same {
        first.clone()
    } else {
        acc.into_iter().map(|v| v / norm).collect()
    };
    FeatureMap::new(current.channels, current.height, current.width, values)
}

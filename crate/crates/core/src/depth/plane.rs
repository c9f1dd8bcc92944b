use crate::error::{Error, Result};
use crate::mask::BBox;

/// Row-major grid of `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl Plane {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::InvalidParameter(format!(
                "expected {} values for {height}x{width}, got {}",
                height * width,
                values.len()
            )));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            values: vec![value; height * width],
        }
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

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.width + col] = value;
    }

    /// Copy of the rectangle `roi` (in this plane's coordinates).
    pub fn window(&self, roi: &Roi) -> Plane {
        let mut values = Vec::with_capacity(roi.height * roi.width);
        for r in roi.row..roi.row + roi.height {
            let start = r * self.width + roi.col;
            values.extend_from_slice(&self.values[start..start + roi.width]);
        }
        Plane {
            height: roi.height,
            width: roi.width,
            values,
        }
    }

    /// Writes `src` with its top-left corner at `(row, col)`.
    pub fn blit(&mut self, src: &Plane, row: usize, col: usize) {
        for r in 0..src.height {
            let dst = (row + r) * self.width + col;
            self.values[dst..dst + src.width]
                .copy_from_slice(&src.values[r * src.width..(r + 1) * src.width]);
        }
    }
}

/// Integer-pixel rectangle: offset plus extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Roi {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl Roi {
    pub fn is_empty(&self) -> bool {
        self.height == 0 || self.width == 0
    }

    /// Rounds `bbox` outward to whole pixels and clips it to an image of the
    /// given size.
    pub fn from_bbox(bbox: &BBox, height: usize, width: usize) -> Result<Roi> {
        let clip = |v: f64, hi: usize| v.clamp(0.0, hi as f64) as usize;
        let c0 = clip(bbox.x1.floor(), width);
        let c1 = clip(bbox.x2.ceil(), width);
        let r0 = clip(bbox.y1.floor(), height);
        let r1 = clip(bbox.y2.ceil(), height);
        if c1 <= c0 || r1 <= r0 {
            return Err(Error::EmptyRoi);
        }
        Ok(Roi {
            row: r0,
            col: c0,
            height: r1 - r0,
            width: c1 - c0,
        })
    }
}

/// A cropped region together with where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub roi: Roi,
    pub plane: Plane,
}

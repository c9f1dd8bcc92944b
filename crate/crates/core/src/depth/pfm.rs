//! Single-channel portable float maps ("Pf").

use std::path::Path;

use super::{DepthMap, Plane};
use crate::error::{Error, Result};

pub fn read_pfm(path: impl AsRef<Path>) -> Result<DepthMap> {
    let bytes = std::fs::read(path.as_ref())?;
    parse_pfm(&bytes)
}

pub fn parse_pfm(bytes: &[u8]) -> Result<DepthMap> {
    let mut pos = 0usize;
    let mut token = || -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PFM header".into()));
        }
        let t = String::from_utf8_lossy(&bytes[start..pos]).into_owned();
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        Ok(t)
    };

    let magic = token()?;
    if magic != "Pf" {
        return Err(Error::Format(format!(
            "expected single-channel PFM magic \"Pf\", got {magic:?}"
        )));
    }
    let parse_dim = |t: String| {
        t.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad PFM dimension {t:?}")))
    };
    let width = parse_dim(token()?)?;
    let height = parse_dim(token()?)?;
    let scale_tok = token()?;
    let scale: f64 = scale_tok
        .parse()
        .map_err(|_| Error::Format(format!("bad PFM scale {scale_tok:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Format(format!("bad PFM scale {scale}")));
    }
    let little = scale < 0.0;

    let raster = &bytes[pos.min(bytes.len())..];
    let n = width * height;
    if raster.len() < n * 4 {
        return Err(Error::Format(format!(
            "PFM raster holds {} bytes, need {}",
            raster.len(),
            n * 4
        )));
    }
    let mut values = vec![0.0f64; n];
    for (i, chunk) in raster.chunks_exact(4).take(n).enumerate() {
        let b = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(b)
        } else {
            f32::from_be_bytes(b)
        };
        // stored bottom-up
        let (file_row, col) = (i / width, i % width);
        values[(height - 1 - file_row) * width + col] = v as f64;
    }
    DepthMap::new(Plane::new(height, width, values)?)
}

/// Writes little-endian, bottom-up, `f32` samples.
pub fn write_pfm(path: impl AsRef<Path>, depth: &DepthMap) -> Result<()> {
    crate::fsutil::write_atomic(path.as_ref(), &encode_pfm(depth))
}

pub fn encode_pfm(depth: &DepthMap) -> Vec<u8> {
    let p = depth.plane();
    let (h, w) = p.dims();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    for r in (0..h).rev() {
        for c in 0..w {
            out.extend_from_slice(&(p.get(r, c) as f32).to_le_bytes());
        }
    }
    out
}

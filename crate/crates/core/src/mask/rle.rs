//! Compressed run-length masks in the COCO / KITTI-MOTS text encoding.
//!
//! Runs are taken over pixels in column-major order and alternate
//! background/foreground, always starting with a (possibly empty) background
//! run. Run `i > 2` is stored as the delta to run `i - 2`; each value is then
//! written low bits first in 5-bit groups, `0x20` flags a continuation, and
//! every 6-bit group is offset by 48 into printable ASCII.

use serde::{Deserialize, Serialize};

use super::BinaryMask;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RleMask {
    pub height: usize,
    pub width: usize,
    pub counts: String,
}

impl RleMask {
    /// Validated run lengths.
    pub fn runs(&self) -> Result<Vec<u64>> {
        let runs = decode_counts(&self.counts)?;
        let total: u64 = runs.iter().sum();
        let expected = (self.height * self.width) as u64;
        if total != expected {
            return Err(Error::MalformedCounts(format!(
                "runs sum to {total}, expected {expected} for {}x{}",
                self.height, self.width
            )));
        }
        Ok(runs)
    }

    pub fn area(&self) -> Result<u64> {
        Ok(self.runs()?.iter().skip(1).step_by(2).sum())
    }

    pub fn decode(&self) -> Result<BinaryMask> {
        rle_decode(self)
    }
}

pub fn rle_encode(mask: &BinaryMask) -> RleMask {
    let (h, w) = mask.dims();
    let mut runs: Vec<u64> = Vec::new();
    let mut current = false;
    let mut len = 0u64;
    for c in 0..w {
        for r in 0..h {
            let v = mask.get(r, c);
            if v != current {
                runs.push(len);
                len = 0;
                current = v;
            }
            len += 1;
        }
    }
    runs.push(len);
    RleMask {
        height: h,
        width: w,
        counts: encode_counts(&runs),
    }
}

pub fn rle_decode(rle: &RleMask) -> Result<BinaryMask> {
    let runs = rle.runs()?;
    let (h, w) = (rle.height, rle.width);
    let mut data = vec![false; h * w];
    let mut idx = 0usize;
    for (i, &run) in runs.iter().enumerate() {
        let fg = i % 2 == 1;
        for k in idx..idx + run as usize {
            // column-major index -> row-major slot
            let (c, r) = (k / h, k % h);
            data[r * w + c] = fg;
        }
        idx += run as usize;
    }
    BinaryMask::new(h, w, data)
}

/// Compress run lengths into the printable counts string.
pub fn encode_counts(runs: &[u64]) -> String {
    let mut out = String::new();
    for (i, &run) in runs.iter().enumerate() {
        let mut x = run as i64;
        if i > 2 {
            x -= runs[i - 2] as i64;
        }
        loop {
            let mut chunk = (x & 0x1f) as u8;
            x >>= 5;
            let more = if chunk & 0x10 != 0 { x != -1 } else { x != 0 };
            if more {
                chunk |= 0x20;
            }
            out.push((chunk + 48) as char);
            if !more {
                break;
            }
        }
    }
    out
}

/// Expand a counts string into run lengths. Does not check the total against
/// any image size; see [`RleMask::runs`].
pub fn decode_counts(counts: &str) -> Result<Vec<u64>> {
    let bytes = counts.as_bytes();
    let mut runs: Vec<u64> = Vec::new();
    let mut i = 0usize;
    while i < bytes.len() {
        let mut x: i64 = 0;
        let mut shift = 0u32;
        loop {
            let Some(&b) = bytes.get(i) else {
                return Err(Error::MalformedCounts(
                    "string ends inside a continued value".into(),
                ));
            };
            if !(48..48 + 64).contains(&b) {
                return Err(Error::MalformedCounts(format!(
                    "invalid character {:?} at offset {i}",
                    b as char
                )));
            }
            if shift > 55 {
                return Err(Error::MalformedCounts(format!(
                    "value starting before offset {i} overflows"
                )));
            }
            let chunk = (b - 48) as i64;
            i += 1;
            x |= (chunk & 0x1f) << shift;
            shift += 5;
            if chunk & 0x20 == 0 {
                if chunk & 0x10 != 0 {
                    x |= -1i64 << shift;
                }
                break;
            }
        }
        let m = runs.len();
        if m > 2 {
            x += runs[m - 2] as i64;
        }
        if x < 0 {
            return Err(Error::MalformedCounts(format!(
                "run {m} decodes to negative count {x}"
            )));
        }
        runs.push(x as u64);
    }
    Ok(runs)
}

//! Middlebury `.flo` optical-flow files.

use std::path::Path;

use super::FlowField;
use crate::error::{Error, Result};

/// "PIEH" read as a little-endian `f32`.
const TAG: f32 = 202021.25;

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    parse_flo(&std::fs::read(path.as_ref())?)
}

pub fn parse_flo(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < 12 {
        return Err(Error::Format("flow file shorter than its header".into()));
    }
    let word = |i: usize| [bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]];
    if f32::from_le_bytes(word(0)) != TAG {
        return Err(Error::Format("missing PIEH tag".into()));
    }
    let width = i32::from_le_bytes(word(4));
    let height = i32::from_le_bytes(word(8));
    if width <= 0 || height <= 0 {
        return Err(Error::Format(format!("bad flow dimensions {width}x{height}")));
    }
    let (w, h) = (width as usize, height as usize);
    let need = 12 + w * h * 8;
    if bytes.len() < need {
        return Err(Error::Format(format!(
            "flow raster holds {} bytes, need {need}",
            bytes.len()
        )));
    }
    let mut dx = Vec::with_capacity(w * h);
    let mut dy = Vec::with_capacity(w * h);
    for i in 0..w * h {
        let off = 12 + i * 8;
        dx.push(f32::from_le_bytes(word(off)) as f64);
        dy.push(f32::from_le_bytes(word(off + 4)) as f64);
    }
    FlowField::new(h, w, dx, dy)
}

pub fn write_flo(path: impl AsRef<Path>, flow: &FlowField) -> Result<()> {
    crate::fsutil::write_atomic(path.as_ref(), &encode_flo(flow))
}

pub fn encode_flo(flow: &FlowField) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + flow.dx().len() * 8);
    out.extend_from_slice(&TAG.to_le_bytes());
    out.extend_from_slice(&(flow.width() as i32).to_le_bytes());
    out.extend_from_slice(&(flow.height() as i32).to_le_bytes());
    for (x, y) in flow.dx().iter().zip(flow.dy()) {
        out.extend_from_slice(&(*x as f32).to_le_bytes());
        out.extend_from_slice(&(*y as f32).to_le_bytes());
    }
    out
}

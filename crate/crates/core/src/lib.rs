//! Toolkit for multi-object tracking and segmentation annotation: RLE
//! instance masks, depth-guided mask refinement, box and mask losses,
//! flow-warped feature aggregation, embedding association, dataset I/O and
//! statistics, and sMOTSA/MOTSA/IDS/HOTA evaluation.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod depth;
pub mod error;
pub mod fsutil;
pub mod loss;
pub mod mask;
pub mod metrics;
pub mod synth;
pub mod temporal;
pub mod tracking;

pub use error::{Error, ErrorCategory, Result};

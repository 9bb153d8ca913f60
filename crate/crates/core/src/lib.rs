//! Tooth-aware registration of intraoral scans to CBCT tooth surfaces.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod geom;
pub mod fpfh;
pub mod arch;
pub mod registration;
pub mod projection;
pub mod pipeline;
pub mod synth;
pub mod io;

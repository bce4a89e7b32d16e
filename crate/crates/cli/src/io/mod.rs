//! File formats: PFM for float maps, PGM/PPM for quantized exports.

pub mod pfm;
pub mod pnm;

pub mod diffusion;
pub mod error;
pub mod image;
pub mod metrics;
pub mod mosaic;
pub mod oracle;
pub mod stokes;

//! Two-stage omni-directional image synthesis.
//!
//! A coarse panorama is synthesized in equirectangular projection (ERP), then
//! refined by synthesizing 26 overlapping perspective (NFoV) views at higher
//! resolution and blending them back onto the sphere. Every learned component
//! is replaced by something that can be verified on a desk:
//!
//! * [`geometry`] — ERP pixel/direction conventions and the rhombicuboctahedron
//!   view directions.
//! * [`projection`] — gnomonic NFoV extraction and re-projection onto ERP.
//! * [`blending`] — distance-weighted merging of overlapping views.
//! * [`codebook`] — a k-means patch codebook standing in for a VQ encoder/decoder.
//! * [`sampler`] — iterative masked-code sampling with a cosine schedule.
//! * [`conditioning`] — known/unknown region construction for in/out-painting.
//! * [`pipeline`] — the two-stage orchestration and reconstruction comparison.
//! * [`metrics`] — area-weighted error, seam and coverage measurements.

pub mod blending;
pub mod codebook;
pub mod conditioning;
pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod projection;
pub mod raster;
pub mod sampler;
pub mod scene;

pub use error::{Error, Result};

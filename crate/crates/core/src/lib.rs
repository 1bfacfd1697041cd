//! Rate-distortion bounds and codebook design for point patterns.
//!
//! A point pattern is a finite multiset of points in `R^d`. The crate
//! provides the `rho2` and USOSPA distortions, samplers for Gaussian and
//! Poisson pattern sources, closed-form and optimized RD bounds, and LBG
//! codebook training with several centering heuristics.

pub mod bounds;
pub mod cli;
pub mod codebook;
pub mod distortion;
pub mod error;
pub mod patterns;
pub mod sampling;

pub use error::{Error, Result};
pub use patterns::{Codebook, CodebookMeta, DistortionSpec, PointPattern, RdPoint};

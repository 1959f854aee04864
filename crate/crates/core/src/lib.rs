//! Poisson image denoising by best linear prediction.
//!
//! A pilot estimate of the clean image supplies, for each group of similar
//! patches, a mean and covariance. Each noisy patch of the group is then
//! replaced by the affine MMSE estimate `μ + Σ (diag(μ) + Σ)⁻¹ (y − μ)`, the
//! overlapping estimates are averaged, and the result becomes the next pilot.

pub mod benchmark;
pub mod blp;
pub mod error;
pub mod image;
pub mod linalg;
pub mod matching;
pub mod metrics;
pub mod pgm;
pub mod pilot;
pub mod pipeline;
pub mod poisson;

pub use error::{Error, Result};
pub use image::{Accumulator, Image, Origin, Patch};
pub use pipeline::{denoise, denoise_pass, PipelineConfig};

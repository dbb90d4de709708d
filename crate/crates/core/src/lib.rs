//! Gaussian pancakes: lattice-structured distributions that are hard to tell
//! apart from a standard Gaussian by sample statistics, but easy to tell apart
//! given score estimates.
//!
//! The crate provides exact 1-D likelihood ratios and scores, samplers, a DDPM
//! reverse sampler over pluggable score oracles, a score-based Gaussianity
//! tester, a brute-force projection-pursuit estimator of the hidden direction,
//! Hermite spectra, and TV/KL quadrature.

pub mod cli;
pub mod diffusion;
pub mod distinguish;
pub mod divergence;
pub mod error;
pub mod estimate;
pub mod gauss1d;
pub mod hermite;
pub mod pancakes;
pub mod quad;
pub mod seeding;
pub mod selftest;
pub mod stats;

pub use error::{Error, Result};

//! Geometric-optics toolkit for lens attacks on monocular depth estimation.
//!
//! The crate predicts how a lens placed in front of a camera rescales
//! perceived depth, synthesizes the corresponding attacked images, searches
//! attack strength against a black-box estimator, scores blur-based defenses,
//! and replays the consequence in a closed-loop braking model.

pub mod attack_opt;
pub mod cli;
pub mod defense;
pub mod error;
pub mod estimation;
pub mod imaging;
pub mod metrics;
pub mod optics;
pub mod report;
pub mod scenario;
pub mod synth;

pub use error::{Error, Result};

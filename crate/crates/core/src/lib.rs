//! Relightable surface capture from multi-pose spherical-gradient image sets.
//!
//! The crate estimates per-view photometric normals and albedo, removes
//! low-frequency bias against a base mesh, segments the mesh into
//! overlapping geodesic patches and stitches textures and normals with
//! screened Poisson solves. A synthetic light stage renders ground truth.

pub mod error;
pub mod linalg;
pub mod meshkit;
pub mod parallel;
pub mod patchwork;
pub mod photometrics;
pub mod pipeline;
pub mod poissonstitch;
pub mod synthstage;

pub use error::{Error, Result};

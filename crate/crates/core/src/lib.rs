//! Divergence-conforming virtual elements for the two-dimensional Brinkman
//! equations on polygonal meshes, with boundary conditions imposed weakly by
//! Nitsche's method.

pub mod analysis;
pub mod assembly;
pub mod dataexpr;
pub mod element;
pub mod error;
pub mod mesh;
pub mod nitsche;
pub mod polyspace;

pub use error::{Error, Result};

/// A point or vector in the plane.
pub type Point = [f64; 2];

//! Evolving surface finite elements for the heat equation on closed curves
//! and surfaces, with the diagnostics used to study discrete maximal
//! `L^p` regularity.

pub mod element;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod green;
pub mod harness;
pub mod mesh;
pub mod solver;
pub mod sparse;
pub mod stats;

pub use error::{Error, Result};

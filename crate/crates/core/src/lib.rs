//! Width-aware topological energies for image segmentation.
//!
//! Persistence of superlevel filtrations, smooth morphology, the width-aware
//! energy with its gradient, a direct AdamW minimizer and a nonlocal soft
//! threshold dynamics segmentation solver that can carry a topological prior.

pub mod adamw;
pub mod config;
pub mod energy;
pub mod error;
pub mod fixtures;
pub mod grid;
pub mod io;
pub mod minimize;
pub mod nlstd;
pub mod morphology;
mod par;
pub mod persistence;

pub use error::{Error, Result};
pub use grid::{NeighborhoodShape, NeighborhoodSpec, PixelIndex, ScalarField, SoftSegmentation};

//! Neumann porous-media laboratory.

pub mod error;
pub mod graph;
pub mod harness;
pub mod mirror;
pub mod numerics;
pub mod particle;
pub mod pde;
pub mod rng;
pub mod testfn;

pub use error::{Error, Result};

//! Lagrange finite elements on structured triangulations together with a
//! measurement harness for local a priori estimates on subdomains of
//! arbitrary scale.
//!
//! The crate is organised bottom-up:
//!
//! * [`mesh`] structured triangulations, aligned subdomains, mesh layers
//! * [`fespace`] P1/P2 Lagrange spaces, interpolation, evaluation
//! * [`forms`] quadrature, assembly of `a0`, `N`, mass and load, norms
//! * [`solver`] CG, BiCGSTAB, dense elimination, local Galerkin solves
//! * [`scaling`] the affine scale map, the `epsilon` factor, cutoffs
//! * [`estimates`] experiments that turn each inequality into measurements
//! * [`harness`] configuration, sweeps and CSV output behind the CLI

pub mod error;
pub mod estimates;
pub mod fespace;
pub mod forms;
pub mod harness;
pub mod mesh;
pub mod scaling;
pub mod solver;

pub use error::{Error, Result};

/// A point in the plane.
pub type Point = [f64; 2];

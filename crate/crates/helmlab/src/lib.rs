//! helmlab: a finite-difference laboratory for the inverse Helmholtz
//! potential problem on a box.
//!
//! The crate provides, on uniform grids over `[0, side]^3`:
//!
//! - geometry, fields, torus Fourier utilities and discrete Sobolev norms
//!   ([`geometry`], [`field`], [`fourier`], [`boundary`]);
//! - Dirichlet and impedance Helmholtz solvers and partial boundary maps
//!   with weighted operator norms ([`solver`], [`forward`]);
//! - eigenvalue windows near a spectral parameter and the associated
//!   resolvent/frequency weights ([`spectral`]);
//! - complex geometrical optics solutions built from a shifted-lattice
//!   Fourier multiplier ([`cgo`]);
//! - quantitative Runge approximation by truncated SVD of the
//!   boundary-to-interior operator ([`runge`]);
//! - Fourier-side reconstruction of the potential difference from boundary
//!   data with the associated parameter schedules and the triple-logarithmic
//!   modulus ([`reconstruct`]);
//! - experiment orchestration with structured CSV/JSON outputs ([`harness`]).
//!
//! Start with the `examples/` directory: each file is a runnable walk-through
//! of one capability (`cargo run --release --example forward_convergence`,
//! etc.). The `helmlab` binary exposes the same flows as subcommands.

pub mod boundary;
pub mod cgo;
pub mod error;
pub mod field;
pub mod forward;
pub mod fourier;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod reconstruct;
pub mod runge;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};

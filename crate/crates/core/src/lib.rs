//! Quantum and classical dynamics of a charged particle on a finite square
//! lattice in crossed magnetic and electric fields.
//!
//! The magnetic field enters through a rational Peierls phase `α = r/q` in
//! the Landau gauge, the electric field `F` points along the y axis, and the
//! strip has `Lx` columns. Units: `e = d = ħ = 1`.

pub mod bands;
pub mod classical;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod landau_stark;
pub mod lattice;
pub mod linalg;
pub mod manifest;
pub mod parallel;
pub mod recipes;
pub mod statistics;

pub use error::{Error, Result};
pub use lattice::{build_hamiltonian, BoundaryX, Flux, Grid, Hamiltonian, LatticeConfig, WaveFunction, C64};

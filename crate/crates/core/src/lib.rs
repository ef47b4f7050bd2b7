//! Pseudo-spectral solver for ideal incompressible MHD around a strong
//! uniform background field, written in Elsasser variables, together with
//! the weighted energy, flux and scattering diagnostics used to study
//! Alfvén-wave collisions.

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod fft;
pub mod io;
pub mod grid;
pub mod model1d;
pub mod scattering;
pub mod solver;
pub mod spectral;
pub mod state;

pub use error::{Error, Result};
pub use grid::{DomainSpec, Species, WeightParams};

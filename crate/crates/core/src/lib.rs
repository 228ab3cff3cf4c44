//! Exact computational workbench for the higher unipotent groups
//! U_h^{2,q}(F_{q²}): their subgroup lattice and characters, induced
//! representations, the determinant-condition subscheme cut out inside the
//! group, and twisted Frobenius fixed-point counts, all in exact arithmetic
//! (finite-field towers and cyclotomic integers; no floating point anywhere).

pub mod chars;
pub mod cyclo;
pub mod error;
pub mod gf;
pub mod suite;
pub mod sympoly;
pub mod unipotent;
pub mod variety;

pub use error::{Error, Result};

//! Cramér-Rao and quantum Fisher-information bounds for a dipole light scatterer.
//!
//! The crate estimates how precisely the polarizability `χ₀` and the position
//! `r₀ = (x₀, y₀, z₀)` of a small scatterer can be inferred from light it scatters
//! out of a plane-wave pulse. Two routes are provided:
//!
//! * a classical route ([`fields`], [`detector`], [`fisher`]) that builds the
//!   Fisher information of Poissonian pixel counts on a planar or hemispherical
//!   detector, in near and far field;
//! * a quantum route ([`quadrature`], [`qfi`]) that evaluates the time-dependent
//!   quantum Fisher information of the scattered coherent field, which bounds
//!   every possible measurement.
//!
//! All internal arithmetic uses natural units `ħ = c = ε₀ = 1` with the incident
//! wavenumber `k_in = 1`; see [`model::UnitSystem`] for conversions.

pub mod detector;
pub mod error;
pub mod fields;
pub mod fisher;
pub mod model;
pub mod oracles;
pub mod qfi;
pub mod quadrature;
pub mod scenarios;
pub mod tolerances;
pub mod vec3;

pub use error::{Error, Result};

//! Numerical tolerances and default discretization constants in one place.

/// Field evaluations closer than this fraction of a wavelength are rejected.
pub const SINGULAR_RHO_OVER_LAMBDA: f64 = 1e-6;

/// Regularized fields with `ρ < EXTRAPOLATION_RHO_OVER_A0 · a₀` are flagged.
pub const EXTRAPOLATION_RHO_OVER_A0: f64 = 3.0;

/// Finite-difference step relative to `min(λ, detector scale)`.
pub const FD_STEP_REL: f64 = 1e-4;

/// Allowed relative change between the `h` and `h/2` central differences.
pub const FD_RICHARDSON_TOL: f64 = 1e-4;

/// Fisher matrices with larger condition numbers are reported as degenerate.
pub const MAX_CONDITION_NUMBER: f64 = 1e12;

/// Default sinh-grid inner spacing `d/k₀`.
pub const SINH_D_OVER_K0: f64 = 2.5e-3;

/// Default sinh-grid stretch `Δ`.
pub const SINH_DELTA: f64 = 3.8e-2;

/// Default sinh-grid upper bound `k_max/k₀`.
pub const SINH_KMAX_OVER_K0: f64 = 1.1e3;

/// Symmetry tolerance for information matrices.
pub const SYMMETRY_REL: f64 = 1e-12;

/// PSD tolerance: smallest eigenvalue ≥ −PSD_REL · largest.
pub const PSD_REL: f64 = 1e-10;

/// Upper bound on pixels per detector grid.
pub const MAX_PIXELS: usize = 16_000_000;

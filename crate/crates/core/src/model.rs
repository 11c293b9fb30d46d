//! Shared domain types, parameter ordering and the internal unit system.
//!
//! Internally `ħ = c = ε₀ = 1` and the incident wavenumber is `k_in = 1`, so one
//! internal length is `λ_in/2π` and one wavelength is `2π`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix4, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::vec3::Vec3;
use crate::{Error, Result};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const C_LIGHT: f64 = 299_792_458.0;
pub const EPS0: f64 = 8.854_187_812_8e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantityKind {
    Length,
    Time,
    /// Angular frequency in rad/s.
    Frequency,
    /// Polarizability volume `χ₀` in m³ (SI polarizability is `2ε₀χ₀`).
    Polarizability,
    /// Photons per m².
    Fluence,
    /// Electric field amplitude in V/m.
    FieldAmplitude,
}

impl QuantityKind {
    pub const ALL: [QuantityKind; 6] = [
        QuantityKind::Length,
        QuantityKind::Time,
        QuantityKind::Frequency,
        QuantityKind::Polarizability,
        QuantityKind::Fluence,
        QuantityKind::FieldAmplitude,
    ];
}

impl FromStr for QuantityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "length" => Ok(Self::Length),
            "time" => Ok(Self::Time),
            "frequency" => Ok(Self::Frequency),
            "polarizability" => Ok(Self::Polarizability),
            "fluence" => Ok(Self::Fluence),
            "field-amplitude" | "field_amplitude" => Ok(Self::FieldAmplitude),
            other => Err(Error::Config(format!("unknown quantity kind `{other}`"))),
        }
    }
}

/// Scale factors between SI and internal units for a given incident wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    /// Metres per internal length (`λ_in/2π`).
    pub length_unit: f64,
    /// Seconds per internal time.
    pub time_unit: f64,
}

impl UnitSystem {
    pub fn from_wavelength(lambda_m: f64) -> Result<Self> {
        if !(lambda_m > 0.0 && lambda_m.is_finite()) {
            return Err(Error::Config(format!("wavelength must be positive, got {lambda_m}")));
        }
        let length_unit = lambda_m / (2.0 * std::f64::consts::PI);
        Ok(Self { length_unit, time_unit: length_unit / C_LIGHT })
    }

    /// SI size of one internal unit of the given kind.
    pub fn unit_of(&self, kind: QuantityKind) -> f64 {
        let l = self.length_unit;
        match kind {
            QuantityKind::Length => l,
            QuantityKind::Time => self.time_unit,
            QuantityKind::Frequency => 1.0 / self.time_unit,
            QuantityKind::Polarizability => l * l * l,
            QuantityKind::Fluence => 1.0 / (l * l),
            QuantityKind::FieldAmplitude => (HBAR * C_LIGHT / EPS0).sqrt() / (l * l),
        }
    }

    pub fn to_internal(&self, value: f64, kind: QuantityKind) -> f64 {
        value / self.unit_of(kind)
    }

    pub fn from_internal(&self, value: f64, kind: QuantityKind) -> f64 {
        value * self.unit_of(kind)
    }

    /// Incident wavenumber in internal units; 1 by construction.
    pub fn k_in(&self) -> f64 {
        let lambda_m = 2.0 * std::f64::consts::PI * self.length_unit;
        2.0 * std::f64::consts::PI / lambda_m * self.length_unit
    }
}

/// The scatterer: estimation targets `χ₀`, `r₀` plus model constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub chi0: f64,
    /// Regularization size; 0 selects the point dipole.
    pub a0: f64,
    pub r0: Vec3,
    pub omega0: f64,
}

impl Scatterer {
    pub fn new(chi0: f64, a0: f64, r0: Vec3, omega0: f64) -> Result<Self> {
        if !(chi0 >= 0.0 && chi0.is_finite()) {
            return Err(Error::Config(format!("chi0 must be non-negative, got {chi0}")));
        }
        if !(a0 >= 0.0 && a0.is_finite()) {
            return Err(Error::Config(format!("a0 must be non-negative, got {a0}")));
        }
        if !(omega0 > 0.0) {
            return Err(Error::Config(format!("omega0 must be positive, got {omega0}")));
        }
        if r0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("r0 must be finite".into()));
        }
        Ok(Self { chi0, a0, r0, omega0 })
    }

    /// `d₀² = ħε₀ω₀χ₀`, chosen so that `χ(0) = χ₀`.
    pub fn d0_sq(&self) -> f64 {
        self.omega0 * self.chi0
    }

    /// Copy with the estimation parameters replaced.
    pub fn with_params(&self, theta: &ParamVector) -> Self {
        Self { chi0: theta.theta[0], r0: [theta.theta[1], theta.theta[2], theta.theta[3]], ..*self }
    }

    pub fn params(&self) -> ParamVector {
        ParamVector { theta: [self.chi0, self.r0[0], self.r0[1], self.r0[2]] }
    }

    /// The quantum model needs the incident carrier below the resonance.
    pub fn check_off_resonant(&self, pulse: &Pulse) -> Result<()> {
        if pulse.k_in >= self.omega0 {
            return Err(Error::Domain(format!(
                "incident frequency {} is not below the resonance {}",
                pulse.k_in, self.omega0
            )));
        }
        Ok(())
    }
}

/// `d₀²` for a scatterer, in internal units.
pub fn derived_d0_sq(s: &Scatterer) -> f64 {
    s.d0_sq()
}

/// Gaussian plane-wave pulse along `+z`, polarized along `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub k_in: f64,
    /// Envelope width: `g(t) = exp(−πt²/2τ²)`.
    pub tau: f64,
    /// Photon fluence `Φ`.
    pub phi: f64,
}

impl Pulse {
    pub fn new(k_in: f64, tau: f64, phi: f64) -> Result<Self> {
        if !(k_in > 0.0) {
            return Err(Error::Config(format!("k_in must be positive, got {k_in}")));
        }
        if !(tau > 0.0) {
            return Err(Error::Config(format!("tau must be positive, got {tau}")));
        }
        if !(phi > 0.0) {
            return Err(Error::Config(format!("fluence must be positive, got {phi}")));
        }
        Ok(Self { k_in, tau, phi })
    }

    /// Peak field amplitude from `Φ = |E|²τ/(2ω)` (internal units).
    pub fn e_amplitude(&self) -> f64 {
        (2.0 * self.k_in * self.phi / self.tau).sqrt()
    }

    /// Peak intensity `|E|²/2`.
    pub fn intensity(&self) -> f64 {
        let e = self.e_amplitude();
        0.5 * e * e
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.k_in
    }

    /// True when the pulse is too short for the far-field closed forms.
    pub fn narrow_band_warning(&self) -> bool {
        self.tau * self.k_in < 10.0
    }
}

/// `θ = (χ₀, x₀, y₀, z₀)`; the order is shared by every information matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub theta: [f64; 4],
}

impl ParamVector {
    pub const LABELS: [&'static str; 4] = ["chi0", "x0", "y0", "z0"];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfoKind {
    ClassicalFi,
    QuantumFi,
}

impl fmt::Display for InfoKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InfoKind::ClassicalFi => f.write_str("classical-FI"),
            InfoKind::QuantumFi => f.write_str("quantum-FI"),
        }
    }
}

/// Per-pulse 4×4 information matrix in [`ParamVector`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoMatrix {
    pub entries: [[f64; 4]; 4],
    pub kind: InfoKind,
}

impl InfoMatrix {
    pub fn zeros(kind: InfoKind) -> Self {
        Self { entries: [[0.0; 4]; 4], kind }
    }

    pub fn labels(&self) -> [&'static str; 4] {
        ParamVector::LABELS
    }

    pub fn get(&self, j: usize, l: usize) -> f64 {
        self.entries[j][l]
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.entries[i][j])
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = *self;
        out.entries.iter_mut().flatten().for_each(|v| *v *= s);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|J_jl − J_lj|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0_f64;
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((self.entries[i][j] - self.entries[j][i]).abs());
            }
        }
        worst / scale
    }

    /// Eigenvalues in ascending order (of the symmetrized matrix).
    pub fn eigenvalues(&self) -> [f64; 4] {
        let m = self.to_matrix();
        let sym = (m + m.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        [ev[0], ev[1], ev[2], ev[3]]
    }

    pub fn is_psd(&self, rel_tol: f64) -> bool {
        let ev = self.eigenvalues();
        ev[0] >= -rel_tol * ev[3].abs()
    }

    /// Ratio of largest to smallest eigenvalue magnitude.
    pub fn condition_number(&self) -> f64 {
        let ev = self.eigenvalues();
        let max = ev.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let min = ev.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

impl std::ops::Add for InfoMatrix {
    type Output = InfoMatrix;

    fn add(mut self, rhs: InfoMatrix) -> InfoMatrix {
        for i in 0..4 {
            for j in 0..4 {
                self.entries[i][j] += rhs.entries[i][j];
            }
        }
        self
    }
}

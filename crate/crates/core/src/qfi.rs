//! Quantum Fisher information of the scattered pulse.
//!
//! The scatterer couples to a continuum of modes with wavenumbers `p` on a
//! sinh grid. For a coherent incident pulse with spectral amplitude `α(k, t)`
//! the scattered amplitudes are linear in `α`, and the QFI reduces to radial
//! integrals of three response functions `f₁, f₂, f₃`:
//!
//! ```text
//! J₁₁ = 8/(15π) ∫dp/2π p²|f₂|²          J₂₂ = 2J₁₁
//! J₃₃ = 2J₁₁ + 8/(3π) ∫dp/2π p²|f₁|²
//! J₀₀ = 4/(3π²) ∫dp p²|f₃|²             J₀₃ = 4/(3π²) Im ∫dp p² f₁ f₃*
//! ```
//!
//! In the PZW gauge
//!
//! ```text
//! f₁(p) = √p ξ_p ∫dk/2π k^{3/2} ξ_k χ(k) [α*/(k+p) − α/(k−p+i0)]
//! f₂(p) = p^{3/2} ξ_p ∫dk/2π k^{1/2} ξ_k χ(k) [α*/(k+p) + α/(k−p+i0)]
//! f₃(p) = √p ξ_p ∫dk/2π k^{1/2} ξ_k (χ(k)/χ₀) [α*/(k+p) + α/(k−p+i0)]
//! ```
//!
//! and in the Coulomb gauge the powers become `(p^{−1/2}, k^{5/2})`,
//! `(p^{1/2}, k^{3/2})`, `(p^{−1/2}, k^{3/2})` with bracket signs `(−, +)`,
//! `(−, −)`, `(−, −)`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::fields::ComplexField;
use crate::model::{InfoKind, InfoMatrix, Pulse, Scatterer};
use crate::quadrature::{gauss_legendre, gl_panels, pv_integrate, pv_on_node, PvIntegrand, SinhGrid};
use crate::vec3::*;
use crate::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Lorentz susceptibility `χ(ω) = d₀²/2 [1/(ω+ω₀) − 1/(ω−ω₀)]`, so `χ(0) = χ₀`.
pub fn chi_response(omega: f64, s: &Scatterer) -> Result<f64> {
    if omega == s.omega0 || omega == -s.omega0 {
        return Err(Error::Domain(format!("susceptibility evaluated on resonance ω = {omega}")));
    }
    Ok(0.5 * s.d0_sq() * (1.0 / (omega + s.omega0) - 1.0 / (omega - s.omega0)))
}

/// `∂χ/∂χ₀ = ω₀²/(ω₀² − ω²)`, finite at `χ₀ = 0`.
pub fn chi_per_chi0(omega: f64, s: &Scatterer) -> Result<f64> {
    if omega == s.omega0 || omega == -s.omega0 {
        return Err(Error::Domain(format!("susceptibility evaluated on resonance ω = {omega}")));
    }
    Ok(s.omega0 * s.omega0 / (s.omega0 * s.omega0 - omega * omega))
}

/// Form factor of the exponential density: `ξ_p = 16/(4 + a₀²p²)²`.
pub fn xi_regularizer(p: f64, a0: f64) -> f64 {
    let q = 4.0 + a0 * a0 * p * p;
    16.0 / (q * q)
}

/// Spectral amplitude of the Gaussian pulse in the `x`-polarized forward modes,
/// `α(k, t) = N e^{−(k−k₀)²(cτ)²/2π} e^{−ikt}/(i√k)`, normalized so that
/// `∫dk/2π |α|² = Φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPulse {
    pub k_in: f64,
    pub ctau: f64,
    pub phi: f64,
    norm: f64,
}

impl SpectralPulse {
    pub fn new(pulse: &Pulse) -> Self {
        let mut sp = Self { k_in: pulse.k_in, ctau: pulse.tau, phi: pulse.phi, norm: 1.0 };
        let raw = sp.band_integral(|_| 1.0);
        sp.norm = (2.0 * PI * pulse.phi / raw).sqrt();
        sp
    }

    fn gauss(&self, k: f64) -> f64 {
        (-(k - self.k_in).powi(2) * self.ctau * self.ctau / (2.0 * PI)).exp()
    }

    /// Band where `|α|²` exceeds ~1e-60 of its peak.
    pub fn band(&self) -> (f64, f64) {
        let w = 20.0 * (PI / 2.0).sqrt() / self.ctau;
        ((self.k_in - w).max(1e-6 * self.k_in), self.k_in + w)
    }

    /// `∫ |α(k)|² m(k) dk` over the band with Gauss-Legendre panels.
    fn band_integral<F: Fn(f64) -> f64>(&self, m: F) -> f64 {
        let (a, b) = self.band();
        let edges: Vec<f64> = (0..=64).map(|i| a + (b - a) * i as f64 / 64.0).collect();
        let (x, w) = gl_panels(&edges, 16);
        x.iter().zip(&w).map(|(&k, &w)| w * self.norm * self.norm * self.gauss(k).powi(2) / k * m(k)).sum()
    }

    pub fn amplitude(&self, k: f64, t: f64) -> Complex64 {
        if k <= 0.0 {
            return ZERO;
        }
        let mag = self.norm * self.gauss(k) / k.sqrt();
        Complex64::from_polar(mag, -k * t) / I
    }

    /// `∫dk/2π |α|²`, which should return `Φ`.
    pub fn recovered_fluence(&self) -> f64 {
        self.band_integral(|_| 1.0) / (2.0 * PI)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gauge {
    Pzw,
    Coulomb,
}

struct FSpec {
    p_pow: f64,
    k_pow: f64,
    s_plus: f64,
    s_minus: f64,
    per_chi0: bool,
}

fn f_specs(gauge: Gauge) -> [FSpec; 3] {
    let f = |p_pow, k_pow, s_plus, s_minus, per_chi0| FSpec { p_pow, k_pow, s_plus, s_minus, per_chi0 };
    match gauge {
        Gauge::Pzw => [f(0.5, 1.5, 1.0, -1.0, false), f(1.5, 0.5, 1.0, 1.0, false), f(0.5, 0.5, 1.0, 1.0, true)],
        Gauge::Coulomb => {
            [f(-0.5, 2.5, -1.0, 1.0, false), f(0.5, 1.5, -1.0, -1.0, false), f(-0.5, 1.5, -1.0, -1.0, true)]
        }
    }
}

/// Spectral weight `k^b ξ_k X(k) α(k, t)`; zero where the pulse has no weight.
fn spectral_weight(spec: &FSpec, k: f64, alpha: Complex64, s: &Scatterer) -> Result<Complex64> {
    if alpha == ZERO {
        return Ok(ZERO);
    }
    let x = if spec.per_chi0 { chi_per_chi0(k, s)? } else { chi_response(k, s)? };
    Ok(alpha * (k.powf(spec.k_pow) * xi_regularizer(k, s.a0) * x))
}

fn check_model(sp: &SpectralPulse, s: &Scatterer) -> Result<()> {
    if sp.k_in >= s.omega0 || sp.band().1 >= s.omega0 {
        return Err(Error::Domain(format!("pulse band reaches the resonance ω₀ = {} (carrier {})", s.omega0, sp.k_in)));
    }
    Ok(())
}

/// `[f₁, f₂, f₃](p, t)` at an arbitrary `p` strictly inside the grid.
pub fn f_functions(
    p: f64,
    t: f64,
    sp: &SpectralPulse,
    s: &Scatterer,
    gauge: Gauge,
    grid: &SinhGrid,
) -> Result<[Complex64; 3]> {
    check_model(sp, s)?;
    let mut out = [ZERO; 3];
    for (o, spec) in out.iter_mut().zip(f_specs(gauge).iter()) {
        let mut plus = ZERO;
        for (&k, &w) in grid.nodes.iter().zip(&grid.weights) {
            plus += spectral_weight(spec, k, sp.amplitude(k, t).conj(), s)? / (k + p) * w;
        }
        // a resonance cannot sit inside the band, so the closure never fails here
        let g = |k: f64| spectral_weight(spec, k, sp.amplitude(k, t), s).unwrap_or(ZERO);
        let minus = pv_integrate(&PvIntegrand { regular_part: g, pole: p }, grid)?.total();
        let pre = p.powf(spec.p_pow) * xi_regularizer(p, s.a0) / (2.0 * PI);
        *o = pre * (spec.s_plus * plus + spec.s_minus * minus);
    }
    Ok(out)
}

/// `f₁, f₂, f₃` tabulated on every node of the grid at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FTable {
    pub t: f64,
    pub p: Vec<f64>,
    pub weights: Vec<f64>,
    pub f: [Vec<Complex64>; 3],
}

impl FTable {
    pub fn compute(t: f64, sp: &SpectralPulse, s: &Scatterer, gauge: Gauge, grid: &SinhGrid) -> Result<Self> {
        check_model(sp, s)?;
        let n = grid.len();
        let alpha: Vec<Complex64> = grid.nodes.iter().map(|&k| sp.amplitude(k, t)).collect();
        // only nodes with spectral weight contribute to the regular sum
        let active: Vec<usize> = (0..n).filter(|&j| alpha[j] != ZERO).collect();
        let specs = f_specs(gauge);
        let mut f: [Vec<Complex64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for (fi, spec) in f.iter_mut().zip(specs.iter()) {
            let g: Vec<Complex64> =
                (0..n).map(|j| spectral_weight(spec, grid.nodes[j], alpha[j], s)).collect::<Result<_>>()?;
            let g_conj: Vec<Complex64> = g.iter().map(|v| v.conj()).collect();
            let mut col = Vec::with_capacity(n);
            for (i, &p) in grid.nodes.iter().enumerate() {
                let plus: Complex64 = active.iter().map(|&j| g_conj[j] * (grid.weights[j] / (grid.nodes[j] + p))).sum();
                let minus = pv_on_node(grid, &g, i, 0.0)?;
                let pre = p.powf(spec.p_pow) * xi_regularizer(p, s.a0) / (2.0 * PI);
                col.push(pre * (spec.s_plus * plus + spec.s_minus * minus));
            }
            *fi = col;
        }
        Ok(Self { t, p: grid.nodes.clone(), weights: grid.weights.clone(), f })
    }

    /// `∫dp p² F(f₁, f₂, f₃)` over the grid.
    fn moment<F: Fn(Complex64, Complex64, Complex64) -> f64>(&self, m: F) -> f64 {
        (0..self.p.len())
            .map(|i| self.weights[i] * self.p[i] * self.p[i] * m(self.f[0][i], self.f[1][i], self.f[2][i]))
            .sum()
    }

    /// The uncorrected QFI matrix.
    pub fn qfi(&self) -> InfoMatrix {
        let i2 = self.moment(|_, f2, _| f2.norm_sqr());
        let i1 = self.moment(|f1, _, _| f1.norm_sqr());
        let i3 = self.moment(|_, _, f3| f3.norm_sqr());
        let i13 = self.moment(|f1, _, f3| (f1 * f3.conj()).im);
        let j11 = 8.0 / (15.0 * PI) * i2 / (2.0 * PI);
        let j33 = 2.0 * j11 + 8.0 / (3.0 * PI) * i1 / (2.0 * PI);
        let j00 = 4.0 / (3.0 * PI * PI) * i3;
        let j03 = 4.0 / (3.0 * PI * PI) * i13;
        let mut m = InfoMatrix::zeros(InfoKind::QuantumFi);
        m.entries[0][0] = j00;
        m.entries[1][1] = j11;
        m.entries[2][2] = 2.0 * j11;
        m.entries[3][3] = j33;
        m.entries[0][3] = j03;
        m.entries[3][0] = j03;
        m
    }
}

/// Radial kernels of the covariance of the scattered vacuum,
/// `δΞ(p′, p)` and `Υ(p′, p)`.
pub fn covariance_kernels(pp: f64, p: f64, s: &Scatterer) -> (f64, f64) {
    let w0 = s.omega0;
    let base = s.d0_sq() * (pp * p).sqrt() * xi_regularizer(pp, s.a0) * xi_regularizer(p, s.a0);
    let dxi = base / ((p + w0) * (pp + w0));
    let ups = -base / (p + pp) * (1.0 / (p + w0) + 1.0 / (pp + w0));
    (dxi, ups)
}

/// Vacuum-covariance corrections to `(0,0)`, `(3,3)` and `(0,3)`.
pub fn covariance_corrections(table: &FTable, s: &Scatterer) -> InfoMatrix {
    let n = table.p.len();
    let d: [Vec<Complex64>; 2] = [table.f[2].clone(), table.f[0].iter().map(|v| -I * v).collect()];
    let wp2: Vec<f64> = (0..n).map(|i| table.weights[i] * table.p[i] * table.p[i]).collect();
    // rows are independent; sum them in order for a deterministic result
    let rows: Vec<[Complex64; 3]> = (0..n)
        .into_par_iter()
        .map(|a| {
            let mut acc = [ZERO; 3];
            if wp2[a] == 0.0 {
                return acc;
            }
            for b in 0..n {
                let (dxi, ups) = covariance_kernels(table.p[a], table.p[b], s);
                if dxi == 0.0 && ups == 0.0 {
                    continue;
                }
                let w = wp2[a] * wp2[b];
                for (slot, (j, l)) in [(0usize, 0usize), (1, 1), (0, 1)].iter().enumerate() {
                    acc[slot] += w * (d[*j][a].conj() * dxi * d[*l][b] + d[*j][a].conj() * ups * d[*l][b].conj());
                }
            }
            acc
        })
        .collect();
    let mut tot = [ZERO; 3];
    for r in &rows {
        for k in 0..3 {
            tot[k] += r[k];
        }
    }
    let c = -4.0 / (9.0 * PI.powi(4));
    let mut m = InfoMatrix::zeros(InfoKind::QuantumFi);
    m.entries[0][0] = c * tot[0].re;
    m.entries[3][3] = c * tot[1].re;
    m.entries[0][3] = c * tot[2].re;
    m.entries[3][0] = c * tot[2].re;
    m
}

/// `|ΔJ_jl|/√(J_jj J_ll)`, the size of a correction relative to the matrix it modifies.
pub fn relative_correction(base: &InfoMatrix, corr: &InfoMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..4 {
        for l in 0..4 {
            let scale = (base.get(j, j) * base.get(l, l)).sqrt();
            if scale > 0.0 {
                worst = worst.max(corr.get(j, l).abs() / scale);
            }
        }
    }
    worst
}

/// QFI per pulse at time `t`.
pub fn qfi_matrix(
    t: f64,
    sp: &SpectralPulse,
    s: &Scatterer,
    gauge: Gauge,
    with_corrections: bool,
    grid: &SinhGrid,
) -> Result<InfoMatrix> {
    if with_corrections && gauge == Gauge::Coulomb {
        return Err(Error::Config("covariance corrections are only available in the PZW gauge".into()));
    }
    let table = FTable::compute(t, sp, s, gauge, grid)?;
    let mut m = table.qfi();
    if with_corrections {
        m = m + covariance_corrections(&table, s);
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QfiSeries {
    pub times: Vec<f64>,
    pub matrices: Vec<InfoMatrix>,
}

/// [`qfi_matrix`] at each time, evaluated in parallel.
pub fn qfi_series(
    times: &[f64],
    sp: &SpectralPulse,
    s: &Scatterer,
    gauge: Gauge,
    with_corrections: bool,
    grid: &SinhGrid,
) -> Result<QfiSeries> {
    let matrices =
        times.par_iter().map(|&t| qfi_matrix(t, sp, s, gauge, with_corrections, grid)).collect::<Result<Vec<_>>>()?;
    Ok(QfiSeries { times: times.to_vec(), matrices })
}

/// Long-time QFI of a point scatterer in a narrow-band pulse,
/// `diag = 8k⁶χ₀²Φ/15π · [5/(kχ₀)², 1, 2, 7]`.
pub fn farfield_qfi(s: &Scatterer, pulse: &Pulse) -> InfoMatrix {
    let k = pulse.k_in;
    let pos = 8.0 * k.powi(6) * s.chi0 * s.chi0 * pulse.phi / (15.0 * PI);
    let mut m = InfoMatrix::zeros(InfoKind::QuantumFi);
    m.entries[0][0] = 8.0 * k.powi(4) * pulse.phi / (3.0 * PI);
    m.entries[1][1] = pos;
    m.entries[2][2] = 2.0 * pos;
    m.entries[3][3] = 7.0 * pos;
    m
}

/// `√N^sc·Δχ₀/χ₀` and `√N^sc·Δr₀/λ` implied by [`farfield_qfi`] with
/// `N^sc = σ_tot Φ`; independent of `χ₀` and `Φ`.
pub fn farfield_normalized_bounds(k_in: f64) -> [f64; 4] {
    let lambda = 2.0 * PI / k_in;
    // N/J₀₀χ₀² = 1/4,  N/J₁₁ = 5/(4k²)
    let r = (5.0 / (4.0 * k_in * k_in)).sqrt() / lambda;
    [0.5, r, r / 2f64.sqrt(), r / 7f64.sqrt()]
}

/// `√(J_far,jj / J_jj)` for the diagonal entries `(χ₀, x, y, z)`.
pub fn normalized_bounds(j: &InfoMatrix, far: &InfoMatrix) -> [f64; 4] {
    let mut out = [f64::NAN; 4];
    for (i, o) in out.iter_mut().enumerate() {
        *o = (far.get(i, i) / j.get(i, i)).sqrt();
    }
    out
}

/// `∫dΩ Σ_μ (e_pμ·e_x)²` over the two transverse polarizations, by quadrature.
fn transverse_weight() -> f64 {
    let (c, wc) = gauss_legendre(24);
    let nphi = 48;
    let mut sum = 0.0;
    for (&ct, &w) in c.iter().zip(&wc) {
        let st = (1.0 - ct * ct).sqrt();
        for m in 0..nphi {
            let phi = 2.0 * PI * (m as f64 + 0.5) / nphi as f64;
            let e_theta = [ct * phi.cos(), ct * phi.sin(), -st];
            let e_phi = [-phi.sin(), phi.cos(), 0.0];
            sum += w * (2.0 * PI / nphi as f64) * (dot(e_theta, EX).powi(2) + dot(e_phi, EX).powi(2));
        }
    }
    sum
}

/// Radial amplitude of the scattered wavepacket in mode `p`,
/// `R(p) = √p ξ_p ∫dk/2π √k ξ_k χ [α/(p−k−i0) − α*/(p+k)]`.
pub fn scattered_radial_amplitude(
    p: f64,
    t: f64,
    sp: &SpectralPulse,
    s: &Scatterer,
    grid: &SinhGrid,
) -> Result<Complex64> {
    check_model(sp, s)?;
    let g = |k: f64| -> Complex64 {
        let a = sp.amplitude(k, t);
        if a == ZERO {
            return ZERO;
        }
        let chi = chi_response(k, s).unwrap_or(0.0);
        a * (k.sqrt() * xi_regularizer(k, s.a0) * chi)
    };
    let resonant = -pv_integrate(&PvIntegrand { regular_part: g, pole: p }, grid)?.total();
    let counter = grid.integrate(|k| g(k).conj() / (p + k));
    Ok(p.sqrt() * xi_regularizer(p, s.a0) / (2.0 * PI) * (resonant - counter))
}

/// Mean number of scattered photons at time `t`, summed over modes directly.
pub fn nsc_transient(t: f64, sp: &SpectralPulse, s: &Scatterer, grid: &SinhGrid) -> Result<f64> {
    let n = grid.len();
    let radial: f64 = (2..n - 2)
        .into_par_iter()
        .map(|i| {
            let p = grid.nodes[i];
            scattered_radial_amplitude(p, t, sp, s, grid).map(|r| grid.weights[i] * p * p * r.norm_sqr())
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    Ok(transverse_weight() * radial / (2.0 * PI).powi(3))
}

fn radial_fn(kind: u8, u: f64) -> f64 {
    if u.abs() < 1e-2 {
        let u2 = u * u;
        return match kind {
            0 => 1.0 - u2 / 6.0 + u2 * u2 / 120.0,
            1 => -1.0 / 3.0 + u2 / 30.0 - u2 * u2 / 840.0,
            _ => u / 3.0 - u * u2 / 30.0 + u * u2 * u2 / 840.0,
        };
    }
    let (sn, cs) = u.sin_cos();
    match kind {
        0 => sn / u,
        1 => (u * cs - sn) / (u * u * u),
        _ => (sn - u * cs) / (u * u),
    }
}

/// Scattered field of the regularized scatterer from the mode integral on the
/// real `p` axis, independent of the closed-form evaluation in [`crate::fields`].
pub fn mode_integral_field(r: Vec3, s: &Scatterer, pulse: &Pulse) -> Result<ComplexField> {
    if s.a0 <= 0.0 {
        return Err(Error::Config("mode integral needs a0 > 0".into()));
    }
    let d = sub(r, s.r0);
    let rho = norm(d);
    if rho < s.a0 {
        return Err(Error::Domain(format!("ρ = {rho} is inside the scatterer size a0 = {}", s.a0)));
    }
    let e_rho = scale(d, 1.0 / rho);
    let k = pulse.k_in;
    let p_max = 2000.0 / s.a0;
    let width = (PI / (2.0 * rho)).min(0.5 / s.a0);
    let panels = ((p_max - 2.0 * k) / width).ceil() as usize;
    if panels > 5_000_000 {
        return Err(Error::Resource(format!("mode integral needs {panels} panels")));
    }
    let near: Vec<f64> = (0..=16).map(|i| 2.0 * k * i as f64 / 16.0).collect();
    let far: Vec<f64> = (0..=panels).map(|i| 2.0 * k + (p_max - 2.0 * k) * i as f64 / panels as f64).collect();
    let (xn, wn) = gl_panels(&near, 24);
    let (xf, wf) = gl_panels(&far, 16);

    let integral = |kind: u8| -> Complex64 {
        let g = |p: f64| p.powi(3) * xi_regularizer(p, s.a0) * radial_fn(kind, p * rho);
        let kern = |p: f64| if kind == 2 { 2.0 * k / (p + k) } else { 2.0 * p / (p + k) };
        let h = |p: f64| g(p) * kern(p);
        let hk = h(k);
        let mut pv: f64 = xn.iter().zip(&wn).map(|(&p, &w)| w * (h(p) - hk) / (p - k)).sum();
        pv += xf.iter().zip(&wf).map(|(&p, &w)| w * h(p) / (p - k)).sum::<f64>();
        (Complex64::new(pv, 0.0) + I * PI * g(k)) / (2.0 * PI * PI)
    };
    let (is, ic, ih) = (integral(0), integral(1), integral(2));
    let proj = dot(e_rho, EX);
    let t = sub(EX, scale(e_rho, proj));
    let l = sub(EX, scale(e_rho, 3.0 * proj));
    let ex = cross(e_rho, EX);
    let pref = Complex64::from_polar(s.chi0 * pulse.e_amplitude() * xi_regularizer(k, s.a0), k * s.r0[2]);
    let e = cadd(cscale(t, pref * is), cscale(l, pref * ic));
    let b = cscale(ex, I * pref * ih);
    Ok(ComplexField { e, b })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GridSpec;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // 13 nm³ at λ = 1.03 μm
    const CHI0: f64 = 2.9e-6;

    fn setup(a0: f64) -> (SpectralPulse, Scatterer, SinhGrid, Pulse) {
        let pulse = Pulse::new(1.0, 43.9, 1.0).unwrap();
        let s = Scatterer::new(CHI0, a0, [0.0; 3], 10.3).unwrap();
        let grid = GridSpec::default().build(1.0).unwrap();
        (SpectralPulse::new(&pulse), s, grid, pulse)
    }

    #[test]
    fn susceptibility_limits() {
        let s = Scatterer::new(12.6, 0.0, [0.0; 3], 10.3).unwrap();
        assert_relative_eq!(chi_response(0.0, &s).unwrap(), 12.6, max_relative = 1e-14);
        assert!(matches!(chi_response(10.3, &s), Err(Error::Domain(_))));
        assert!(chi_response(11.0, &s).unwrap() < 0.0);
        assert_relative_eq!(
            chi_response(1.0, &s).unwrap() / 12.6,
            chi_per_chi0(1.0, &s).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn spectral_normalization() {
        for tau in [10.0, 43.9, 200.0] {
            let sp = SpectralPulse::new(&Pulse::new(1.0, tau, 2.5).unwrap());
            assert_relative_eq!(sp.recovered_fluence(), 2.5, max_relative = 1e-12);
            assert_eq!(sp.amplitude(0.0, 0.0), ZERO);
            assert_eq!(sp.amplitude(-1.0, 0.0), ZERO);
        }
        let (sp, _, grid, _) = setup(0.0);
        let on_grid = grid.integrate_real(|k| sp.amplitude(k, 3.0).norm_sqr()) / (2.0 * PI);
        assert_relative_eq!(on_grid, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn xi_limits() {
        assert_eq!(xi_regularizer(3.0, 0.0), 1.0);
        assert_relative_eq!(xi_regularizer(0.0, 0.7), 1.0);
        assert!(xi_regularizer(100.0, 1.0) < 1e-6);
    }

    #[test]
    fn f2_matches_uniform_excision_oracle() {
        let (sp, s, grid, _) = setup(0.1);
        let p = 1.2;
        let t = 0.0;
        let f = f_functions(p, t, &sp, &s, Gauge::Pzw, &grid).unwrap();
        // brute force: 1e5 uniform nodes on the band, symmetric excision of the pole
        let (a, b) = (0.5, 1.5);
        let n = 100_000;
        let h = (b - a) / n as f64;
        let g = |k: f64| sp.amplitude(k, t) * (k.sqrt() * xi_regularizer(k, s.a0) * chi_response(k, &s).unwrap());
        let mut plus = ZERO;
        let mut pv = ZERO;
        for i in 0..n {
            let k = a + (i as f64 + 0.5) * h;
            plus += g(k).conj() / (k + p) * h;
            if (k - p).abs() > 1e-9 {
                pv += g(k) / (k - p) * h;
            }
        }
        let minus = pv - I * PI * g(p);
        let want = p.powf(1.5) * xi_regularizer(p, s.a0) / (2.0 * PI) * (plus + minus);
        assert!((f[1] - want).norm() < 1e-4 * want.norm(), "{} vs {}", f[1], want);
    }

    #[test]
    fn table_and_callable_routes_agree() {
        let (sp, s, grid, _) = setup(0.05);
        let table = FTable::compute(2.0, &sp, &s, Gauge::Pzw, &grid).unwrap();
        for i in [150usize, 230, 260, 320] {
            let f = f_functions(grid.nodes[i], 2.0, &sp, &s, Gauge::Pzw, &grid).unwrap();
            for m in 0..3 {
                assert!((table.f[m][i] - f[m]).norm() < 1e-6 * f[m].norm().max(1e-8), "{i} f{}", m + 1);
            }
        }
    }

    #[test]
    fn zero_chi0_kills_f1_f2() {
        let (sp, _, grid, _) = setup(0.05);
        let s0 = Scatterer::new(0.0, 0.05, [0.0; 3], 10.3).unwrap();
        let s1 = Scatterer::new(CHI0, 0.05, [0.0; 3], 10.3).unwrap();
        let f0 = f_functions(1.1, 0.0, &sp, &s0, Gauge::Pzw, &grid).unwrap();
        let f1 = f_functions(1.1, 0.0, &sp, &s1, Gauge::Pzw, &grid).unwrap();
        assert_eq!(f0[0], ZERO);
        assert_eq!(f0[1], ZERO);
        assert!((f0[2] - f1[2]).norm() < 1e-14 * f1[2].norm());
    }

    #[test]
    fn structure_of_the_matrix() {
        let (sp, s, grid, _) = setup(0.05);
        let j = qfi_matrix(0.0, &sp, &s, Gauge::Pzw, true, &grid).unwrap();
        assert_relative_eq!(j.get(2, 2), 2.0 * j.get(1, 1), max_relative = 1e-12);
        assert_eq!(j.get(0, 1), 0.0);
        assert_eq!(j.get(0, 2), 0.0);
        assert!(j.asymmetry() < 1e-12);
        assert!(j.is_psd(1e-10));
        assert!(matches!(qfi_matrix(0.0, &sp, &s, Gauge::Coulomb, true, &grid), Err(Error::Config(_))));
    }

    #[test]
    fn linear_in_fluence() {
        let (_, s, grid, _) = setup(0.05);
        let a = SpectralPulse::new(&Pulse::new(1.0, 43.9, 1.0).unwrap());
        let b = SpectralPulse::new(&Pulse::new(1.0, 43.9, 7.0).unwrap());
        let ja = qfi_matrix(1.0, &a, &s, Gauge::Pzw, false, &grid).unwrap();
        let jb = qfi_matrix(1.0, &b, &s, Gauge::Pzw, false, &grid).unwrap();
        for i in 0..4 {
            for k in 0..4 {
                assert!((jb.get(i, k) - 7.0 * ja.get(i, k)).abs() <= 1e-10 * jb.max_abs());
            }
        }
    }

    #[test]
    fn gauges_agree_long_after_the_pulse() {
        let (sp, s, grid, _) = setup(0.01);
        let t = 5.0 * 43.9;
        let a = qfi_matrix(t, &sp, &s, Gauge::Pzw, false, &grid).unwrap();
        let b = qfi_matrix(t, &sp, &s, Gauge::Coulomb, false, &grid).unwrap();
        for i in [0usize, 1, 3] {
            assert_relative_eq!(a.get(i, i), b.get(i, i), max_relative = 1e-3);
        }
    }

    #[test]
    fn transient_photon_number_matches_j00() {
        let (sp, s, grid, _) = setup(0.05);
        for t in [-20.0, 0.0, 30.0] {
            let n = nsc_transient(t, &sp, &s, &grid).unwrap();
            let j = qfi_matrix(t, &sp, &s, Gauge::Pzw, false, &grid).unwrap();
            assert_relative_eq!(j.get(0, 0), 4.0 * n / (s.chi0 * s.chi0), max_relative = 1e-6);
        }
    }

    #[test]
    fn radial_amplitude_is_chi0_f3() {
        let (sp, s, grid, _) = setup(0.05);
        for p in [0.7, 1.0, 1.3, 3.0] {
            let r = scattered_radial_amplitude(p, 4.0, &sp, &s, &grid).unwrap();
            let f = f_functions(p, 4.0, &sp, &s, Gauge::Pzw, &grid).unwrap();
            assert!((r + s.chi0 * f[2]).norm() < 1e-6 * r.norm());
        }
    }

    #[test]
    fn transverse_weight_is_eight_pi_thirds() {
        assert_relative_eq!(transverse_weight(), 8.0 * PI / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn mode_integral_agrees_with_closed_form() {
        let pulse = Pulse::new(1.0, 43.9, 1.0).unwrap();
        let s = Scatterer::new(13.0, 0.2, [0.0; 3], 10.3).unwrap();
        for r in [[1.0, 0.3, 0.5], [0.2, 2.0, -1.5], [0.0, 0.0, 6.0]] {
            let a = mode_integral_field(r, &s, &pulse).unwrap();
            let b = crate::fields::scattered_regularized(r, &s, &pulse).unwrap();
            let scale = cnorm(b.e) + cnorm(b.b);
            let diff = cnorm([a.e[0] - b.e[0], a.e[1] - b.e[1], a.e[2] - b.e[2]])
                + cnorm([a.b[0] - b.b[0], a.b[1] - b.b[1], a.b[2] - b.b[2]]);
            assert!(diff < 1e-6 * scale, "{r:?}: {diff} / {scale}");
        }
        assert!(matches!(mode_integral_field([0.05, 0.0, 0.0], &s, &pulse), Err(Error::Domain(_))));
    }

    #[test]
    fn farfield_ratios() {
        let s = Scatterer::new(13.0, 0.0, [0.0; 3], 10.3).unwrap();
        let pulse = Pulse::new(1.0, 43.9, 1.0).unwrap();
        let j = farfield_qfi(&s, &pulse);
        assert_relative_eq!(j.get(2, 2) / j.get(1, 1), 2.0);
        assert_relative_eq!(j.get(3, 3) / j.get(1, 1), 7.0);
        let b = farfield_normalized_bounds(1.0);
        let want = [0.5, 0.1779, 0.1258, 0.0672];
        for i in 0..4 {
            assert!((b[i] - want[i]).abs() < 1e-4, "{i}: {}", b[i]);
        }
        // N = σΦ with σ = 2k⁴χ₀²/3π gives J₀₀ = 4N/χ₀²
        let n = 2.0 * s.chi0 * s.chi0 / (3.0 * PI);
        assert_relative_eq!(j.get(0, 0), 4.0 * n / (s.chi0 * s.chi0), max_relative = 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn qfi_psd_and_symmetric(t in -60.0f64..60.0, a0 in 0.01f64..0.3) {
            let (sp, _, grid, _) = setup(a0);
            let s = Scatterer::new(CHI0, a0, [0.0; 3], 10.3).unwrap();
            let j = qfi_matrix(t, &sp, &s, Gauge::Pzw, true, &grid).unwrap();
            prop_assert!(j.asymmetry() < 1e-12);
            prop_assert!(j.is_psd(1e-10));
        }
    }
}

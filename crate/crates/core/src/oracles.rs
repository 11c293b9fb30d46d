//! Independent reference computations used to check the production numerics.
//!
//! Each oracle returns the measured error; the caller owns the tolerance.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::detector::{hemisphere_grid, Orientation, Pixel};
use crate::fields::{cross_section, poynting_terms, scattered_point, scattered_regularized, FieldModel};
use crate::fisher::{fi_from_pixels, flux_chi0_derivative, intensity_gradient, mean_counts, Setup};
use crate::model::{Pulse, Scatterer};
use crate::qfi::{chi_response, f_functions, mode_integral_field, xi_regularizer, Gauge, SpectralPulse};
use crate::quadrature::{gl_panels, pv_integrate, GridSpec, PvIntegrand, SinhGrid};
use crate::vec3::*;
use crate::Result;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `|PV∫₀³ dk/(k − 1) − ln 2|`.
pub fn pv_log_case() -> Result<f64> {
    let g = SinhGrid::on_interval(1.0, 1e-3, 0.04, 0.0, 3.0)?;
    let r = pv_integrate(&PvIntegrand { regular_part: |_| c(1.0), pole: 1.0 }, &g)?;
    Ok((r.principal.re - 2f64.ln()).abs().max(r.principal.im.abs()))
}

/// `∫ f(k)/(k − p + iη) dk` by graded Gauss–Legendre panels around the pole.
fn eta_integral<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, p: f64, eta: f64) -> Complex64 {
    let mut offs: Vec<f64> = (-12..40).map(|m| eta * 10f64.powf(m as f64 / 4.0)).collect();
    offs.retain(|&o| p - o > a && p + o < b);
    let mut edges = vec![a];
    edges.extend(offs.iter().rev().map(|o| p - o));
    edges.push(p);
    edges.extend(offs.iter().map(|o| p + o));
    edges.push(b);
    let (x, w) = gl_panels(&edges, 24);
    x.iter().zip(&w).map(|(&k, &wk)| f(k) * wk / Complex64::new(k - p, eta)).sum()
}

/// Relative distance between `PV − iπ f(p)` and the `η → 0⁺` limit of the
/// regularized integral, extrapolated from `η = 1e-4, 1e-5`.
pub fn sokhotski_limit() -> Result<f64> {
    let f = |k: f64| Complex64::new((-(k - 1.0).powi(2) * 8.0).exp() * (1.0 + k), 0.3 * k);
    let (a, b, p) = (0.0, 3.0, 0.9);
    let g = SinhGrid::on_interval(1.0, 1e-3, 0.03, a, b)?;
    let pv = pv_integrate(&PvIntegrand { regular_part: f, pole: p }, &g)?.total();
    let i4 = eta_integral(&f, a, b, p, 1e-4);
    let i5 = eta_integral(&f, a, b, p, 1e-5);
    let limit = (10.0 * i5 - i4) / 9.0;
    Ok((limit - pv).norm() / limit.norm())
}

/// Relative error of `f₂(p)` on the production grid against a brute-force sum on
/// `n` uniform nodes with symmetric excision of the pole.
pub fn dense_f_function(n: usize) -> Result<f64> {
    let pulse = Pulse::new(1.0, 43.9, 1.0)?;
    let sp = SpectralPulse::new(&pulse);
    let s = Scatterer::new(2.9e-6, 0.1, [0.0; 3], 10.3)?;
    let grid = GridSpec::default().build(1.0)?;
    let (p, t) = (1.2, 0.0);
    let f = f_functions(p, t, &sp, &s, Gauge::Pzw, &grid)?;
    let (a, b) = (0.5, 1.5);
    let h = (b - a) / n as f64;
    let g = |k: f64| sp.amplitude(k, t) * (k.sqrt() * xi_regularizer(k, s.a0) * chi_response(k, &s).unwrap_or(0.0));
    let mut plus = c(0.0);
    let mut pv = c(0.0);
    for i in 0..n {
        let k = a + (i as f64 + 0.5) * h;
        plus += g(k).conj() / (k + p) * h;
        if (k - p).abs() > 1e-9 {
            pv += g(k) / (k - p) * h;
        }
    }
    let want = p.powf(1.5) * xi_regularizer(p, s.a0) / (2.0 * PI) * (plus + pv - I * PI * g(p));
    Ok((f[1] - want).norm() / want.norm())
}

fn weak_setup(chi0: f64, phi: f64) -> Result<Setup> {
    let s = Scatterer::new(chi0, 0.0, [0.0; 3], 10.3)?;
    Ok(Setup::new(s, Pulse::new(1.0, 1e3, phi)?, FieldModel::Point))
}

fn pixel(x: f64, y: f64, z: f64, area: f64) -> Pixel {
    Pixel { position: [x, y, z], normal: EZ, area }
}

/// Worst relative gap between the analytic `∂n̄/∂χ₀` and a central difference.
pub fn fd_chi0_gradient() -> Result<f64> {
    let st = weak_setup(3e-3, 1.0)?;
    let mut worst = 0.0_f64;
    for p in [pixel(0.2, 0.1, 0.4, 1.0), pixel(-1.0, 2.0, -0.7, 1.0), pixel(5.0, 0.0, 9.0, 1.0)] {
        let per_flux = st.pulse.phi * p.area / st.pulse.intensity();
        let analytic = flux_chi0_derivative(&p, &st)? * per_flux;
        let h = 1e-3 * st.scatterer.chi0;
        let counts = |chi0: f64| {
            let s = Setup { scatterer: Scatterer { chi0, ..st.scatterer }, ..st };
            mean_counts(&p, &s)
        };
        let fd = (counts(st.scatterer.chi0 + h)? - counts(st.scatterer.chi0 - h)?) / (2.0 * h);
        worst = worst.max((fd - analytic).abs() / analytic.abs());
    }
    Ok(worst)
}

/// Relative gap between the scattered power through a closed sphere of radius
/// `radius` (two hemispherical detectors) and `σ_tot I_in`.
pub fn energy_conservation(radius: f64) -> Result<f64> {
    let s = Scatterer::new(2.9e-6, 0.0, [0.0; 3], 10.3)?;
    let pulse = Pulse::new(1.0, 1e3, 1.0)?;
    let lambda = pulse.wavelength();
    let mut power = 0.0;
    for o in [Orientation::Forward, Orientation::Backward] {
        let grid = hemisphere_grid(radius, o, 2.0 * PI, 1, lambda)?;
        for px in &grid.pixels {
            let sc = scattered_point(px.position, &s, &pulse)?;
            let flux = poynting_terms(&crate::fields::ComplexField::ZERO, &sc).sc_sc;
            power += dot(flux, scale(px.position, 1.0 / radius)) * px.area;
        }
    }
    let want = cross_section(&s, &pulse) * pulse.intensity();
    Ok((power - want).abs() / want)
}

fn field_gap(a: &crate::fields::ComplexField, b: &crate::fields::ComplexField) -> f64 {
    let de = cnorm(cadd(a.e, cmul(b.e, c(-1.0))));
    let db = cnorm(cadd(a.b, cmul(b.b, c(-1.0))));
    (de + db) / (cnorm(b.e) + cnorm(b.b))
}

/// Worst relative gap between the mode-integral field and the closed-form
/// regularized field at distances `5a₀`, `λ/10` and `λ` along a few directions.
pub fn mode_integral_vs_closed_form(a0: f64) -> Result<f64> {
    let pulse = Pulse::new(1.0, 43.9, 1.0)?;
    let s = Scatterer::new(2.9e-6, a0, [0.0; 3], 10.3)?;
    let lambda = pulse.wavelength();
    let dirs = [[1.0, 0.0, 0.0], [0.0, 0.6, 0.8], [0.48, 0.6, -0.64]];
    let mut worst = 0.0_f64;
    for rho in [5.0 * a0, lambda / 10.0, lambda] {
        for d in dirs {
            let r = scale(d, rho);
            let a = mode_integral_field(r, &s, &pulse)?;
            let b = scattered_regularized(r, &s, &pulse)?;
            worst = worst.max(field_gap(&a, &b));
        }
    }
    Ok(worst)
}

/// Relative gap of both regularized fields to the point-dipole field at `λ`
/// for a scatterer of size `a₀`.
pub fn point_limit(a0: f64) -> Result<(f64, f64)> {
    let pulse = Pulse::new(1.0, 43.9, 1.0)?;
    let s = Scatterer::new(2.9e-6, a0, [0.0; 3], 10.3)?;
    let r = [0.0, 0.6 * pulse.wavelength(), 0.8 * pulse.wavelength()];
    let point = scattered_point(r, &s, &pulse)?;
    let modes = mode_integral_field(r, &s, &pulse)?;
    let closed = scattered_regularized(r, &s, &pulse)?;
    Ok((field_gap(&modes, &point), field_gap(&closed, &point)))
}

/// Largest entry gap, relative to the largest entry, between the Poisson FI and
/// `Σ_n p(n)(∂ ln p(n))²` summed explicitly on a 3×3 toy detector.
pub fn poisson_likelihood() -> Result<f64> {
    let st = weak_setup(0.05, 30.0)?;
    let h = 1e-5;
    let pixels: Vec<Pixel> =
        (0..9).map(|i| pixel(0.4 * (i % 3) as f64 - 0.4, 0.4 * (i / 3) as f64 - 0.4, 0.6, 0.3)).collect();
    let fi = fi_from_pixels(&pixels, &st, h)?;
    let mut brute = [[0.0; 4]; 4];
    for p in &pixels {
        let nbar = mean_counts(p, &st)?;
        let per_flux = st.pulse.phi * p.area / st.pulse.intensity();
        let g = intensity_gradient(p, &st, h)?.map(|v| v * per_flux);
        // ∂ ln p(n) = (n/n̄ − 1) ∂n̄
        let mut prob = (-nbar).exp();
        let mut second = 0.0;
        for n in 0..=200 {
            second += prob * (n as f64 / nbar - 1.0).powi(2);
            prob *= nbar / (n + 1) as f64;
        }
        for j in 0..4 {
            for l in 0..4 {
                brute[j][l] += second * g[j] * g[l];
            }
        }
    }
    let mut worst = 0.0_f64;
    for j in 0..4 {
        for l in 0..4 {
            worst = worst.max((fi.get(j, l) - brute[j][l]).abs());
        }
    }
    Ok(worst / fi.max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_oracles_pass() {
        assert!(pv_log_case().unwrap() < 1e-8);
        assert!(sokhotski_limit().unwrap() < 1e-4);
        assert!(fd_chi0_gradient().unwrap() < 1e-6);
        assert!(poisson_likelihood().unwrap() < 1e-8);
        assert!(dense_f_function(100_000).unwrap() < 1e-4);
    }

    #[test]
    fn energy_through_a_far_sphere() {
        let e = energy_conservation(20.0 * 2.0 * PI).unwrap();
        assert!(e < 5e-3, "{e}");
    }

    #[test]
    fn mode_integral_oracle() {
        let e = mode_integral_vs_closed_form(2.0 * PI / 30.0).unwrap();
        assert!(e < 1e-3, "{e}");
        let (m, c) = point_limit(0.01).unwrap();
        assert!(m < 1e-3 && c < 1e-3, "{m} {c}");
    }
}

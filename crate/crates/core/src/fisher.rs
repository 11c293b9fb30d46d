//! Classical Fisher information of Poissonian pixel counts and the Cramér-Rao bound.
//!
//! A pixel of area `dA` and normal `n` counts on average
//! `n̄ = Φ dA (n·S)/I_in` photons, where `S` is the time-averaged Poynting
//! vector of incident plus scattered field and `I_in = |E_in|²/2`. Independent
//! Poisson counts give `𝓘_jl = Σ (∂_j n̄)(∂_l n̄)/n̄`.

use nalgebra::Matrix4;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{Pixel, PixelGrid};
use crate::fields::{cross_section, incident_field, poynting_terms, scattered, ComplexField, Envelope, FieldModel};
use crate::model::{InfoKind, InfoMatrix, Pulse, Scatterer};
use crate::tolerances::{FD_RICHARDSON_TOL, FD_STEP_REL, MAX_CONDITION_NUMBER};
use crate::vec3::*;
use crate::{Error, Result};

/// Everything needed to evaluate counts on a pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setup {
    pub scatterer: Scatterer,
    pub pulse: Pulse,
    pub model: FieldModel,
}

impl Setup {
    pub fn new(scatterer: Scatterer, pulse: Pulse, model: FieldModel) -> Self {
        Self { scatterer, pulse, model }
    }

    /// Scattered field of the same scatterer with `χ₀ = 1`.
    fn unit_scattered(&self, r: Vec3, r0: Vec3) -> Result<ComplexField> {
        let s = Scatterer { chi0: 1.0, r0, ..self.scatterer };
        scattered(self.model, r, &s, &self.pulse)
    }

    fn incident(&self, r: Vec3) -> ComplexField {
        incident_field(r, 0.0, &self.pulse, Envelope::Stationary)
    }

    /// Counts per unit projected flux.
    fn counts_per_flux(&self, pixel: &Pixel) -> f64 {
        self.pulse.phi * pixel.area / self.pulse.intensity()
    }
}

/// Projected flux `n·S` and its scatterer-dependent part for a scatterer at `r0`.
fn projected_flux(setup: &Setup, pixel: &Pixel, r0: Vec3) -> Result<(f64, f64)> {
    let inc = setup.incident(pixel.position);
    let sc = setup.unit_scattered(pixel.position, r0)?.scale(setup.scatterer.chi0);
    let terms = poynting_terms(&inc, &sc);
    Ok((dot(terms.total(), pixel.normal), dot(terms.scatterer_dependent(), pixel.normal)))
}

pub fn mean_counts(pixel: &Pixel, setup: &Setup) -> Result<f64> {
    let (flux, _) = projected_flux(setup, pixel, setup.scatterer.r0)?;
    if flux < 0.0 {
        return Err(Error::ModelViolation(format!("negative projected flux {flux:e} at pixel {:?}", pixel.position)));
    }
    Ok(flux * setup.counts_per_flux(pixel))
}

/// `∂(n·S)/∂χ₀` from the linearity of the scattered field in `χ₀`.
pub fn flux_chi0_derivative(pixel: &Pixel, setup: &Setup) -> Result<f64> {
    let inc = setup.incident(pixel.position);
    let unit = setup.unit_scattered(pixel.position, setup.scatterer.r0)?;
    let terms = poynting_terms(&inc, &unit);
    let d = add(terms.cross(), scale(terms.sc_sc, 2.0 * setup.scatterer.chi0));
    Ok(dot(d, pixel.normal))
}

/// Central differences of the scatterer-dependent flux in the position of the scatterer.
fn position_fd(pixel: &Pixel, setup: &Setup, h: f64) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for (j, o) in out.iter_mut().enumerate() {
        let mut plus = setup.scatterer.r0;
        let mut minus = setup.scatterer.r0;
        plus[j] += h;
        minus[j] -= h;
        let (_, fp) = projected_flux(setup, pixel, plus)?;
        let (_, fm) = projected_flux(setup, pixel, minus)?;
        *o = (fp - fm) / (2.0 * h);
    }
    Ok(out)
}

/// `∂(n·S)/∂θ` for `θ = (χ₀, x₀, y₀, z₀)`, with `h` the base finite-difference step.
///
/// Position derivatives are accepted when the `h` and `h/2` differences agree;
/// otherwise the step is reduced tenfold, up to three times.
pub fn intensity_gradient(pixel: &Pixel, setup: &Setup, h: f64) -> Result<[f64; 4]> {
    let d0 = flux_chi0_derivative(pixel, setup)?;
    let (_, sd) = projected_flux(setup, pixel, setup.scatterer.r0)?;
    let mut step = h;
    for _ in 0..4 {
        let coarse = position_fd(pixel, setup, step)?;
        let fine = position_fd(pixel, setup, 0.5 * step)?;
        let mag = fine.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let diff = coarse.iter().zip(&fine).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        // differences below the roundoff floor of the flux itself carry no information
        let floor = 1e-9 * sd.abs() / step;
        if diff <= FD_RICHARDSON_TOL * mag + floor {
            let r: Vec<f64> = coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect();
            return Ok([d0, r[0], r[1], r[2]]);
        }
        step *= 0.1;
    }
    Err(Error::Accuracy(format!("finite differences did not settle at pixel {:?}", pixel.position)))
}

/// Finite-difference step for a detector at distance `scale`.
pub fn fd_step(pulse: &Pulse, scale: f64) -> f64 {
    FD_STEP_REL * pulse.wavelength().min(scale)
}

/// One pixel's contribution `(∂n̄)(∂n̄)ᵀ/n̄`.
fn pixel_info(pixel: &Pixel, setup: &Setup, h: f64) -> Result<[[f64; 4]; 4]> {
    let n = mean_counts(pixel, setup)?;
    if !(n > 0.0) {
        return Err(Error::Singular(format!("zero mean counts at pixel {:?}", pixel.position)));
    }
    let c = setup.counts_per_flux(pixel);
    let g = intensity_gradient(pixel, setup, h)?.map(|v| v * c);
    let mut m = [[0.0; 4]; 4];
    for j in 0..4 {
        for l in 0..4 {
            m[j][l] = g[j] * g[l] / n;
        }
    }
    Ok(m)
}

const CHUNK: usize = 1024;

/// FI summed over a pixel list; chunks are reduced in a fixed order.
pub fn fi_from_pixels(pixels: &[Pixel], setup: &Setup, h: f64) -> Result<InfoMatrix> {
    let partial: Vec<[[f64; 4]; 4]> = pixels
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = [[0.0; 4]; 4];
            for p in chunk {
                let m = pixel_info(p, setup, h)?;
                for j in 0..4 {
                    for l in 0..4 {
                        acc[j][l] += m[j][l];
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut out = InfoMatrix::zeros(InfoKind::ClassicalFi);
    for acc in &partial {
        for j in 0..4 {
            for l in 0..4 {
                out.entries[j][l] += acc[j][l];
            }
        }
    }
    // symmetrize exactly; the products are symmetric already up to summation order
    for j in 0..4 {
        for l in 0..j {
            let v = 0.5 * (out.entries[j][l] + out.entries[l][j]);
            out.entries[j][l] = v;
            out.entries[l][j] = v;
        }
    }
    Ok(out)
}

pub fn fi_matrix(grid: &PixelGrid, setup: &Setup) -> Result<InfoMatrix> {
    let h = fd_step(&setup.pulse, grid.geometry.distance());
    fi_from_pixels(&grid.pixels, setup, h)
}

/// `N^sc = σ_tot Φ`.
pub fn n_scattered(s: &Scatterer, pulse: &Pulse) -> f64 {
    cross_section(s, pulse) * pulse.phi
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrbResult {
    /// `√[𝓘⁻¹]_ll` for `(χ₀, x₀, y₀, z₀)`.
    pub sigma: [f64; 4],
    /// `√N^sc·Δχ₀/χ₀` and `√N^sc·Δr₀/λ`.
    pub normalized: [f64; 4],
    /// Condition number of the diagonally scaled FI.
    pub condition_number: f64,
}

/// Condition number of `D^{-1/2} 𝓘 D^{-1/2}` with `D = diag 𝓘`, which does not
/// depend on the units of the parameters.
pub fn scaled_condition_number(fi: &InfoMatrix) -> f64 {
    let d: Vec<f64> = (0..4).map(|i| fi.get(i, i)).collect();
    if d.iter().any(|v| !(*v > 0.0)) {
        return f64::INFINITY;
    }
    let mut scaled = *fi;
    for j in 0..4 {
        for l in 0..4 {
            scaled.entries[j][l] = fi.get(j, l) / (d[j] * d[l]).sqrt();
        }
    }
    scaled.condition_number()
}

pub fn crb_from_fi(fi: &InfoMatrix, nsc: f64, chi0: f64, lambda: f64) -> Result<CrbResult> {
    let cond = scaled_condition_number(fi);
    if !(cond < MAX_CONDITION_NUMBER) {
        return Err(Error::Degenerate { condition: cond });
    }
    let m: Matrix4<f64> = fi.to_matrix();
    let inv = m.try_inverse().ok_or(Error::Degenerate { condition: cond })?;
    let mut sigma = [0.0; 4];
    for (l, s) in sigma.iter_mut().enumerate() {
        let v = inv[(l, l)];
        if !(v > 0.0) {
            return Err(Error::Degenerate { condition: cond });
        }
        *s = v.sqrt();
    }
    let root = nsc.sqrt();
    let normalized =
        [sigma[0] * root / chi0, sigma[1] * root / lambda, sigma[2] * root / lambda, sigma[3] * root / lambda];
    Ok(CrbResult { sigma, normalized, condition_number: cond })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::planar_grid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn setup(chi0: f64, phi: f64) -> Setup {
        // 13 nm³ at λ = 1.03 μm in units of λ/2π
        let s = Scatterer::new(chi0, 0.0, [0.0; 3], 10.3).unwrap();
        Setup::new(s, Pulse::new(1.0, 1e3, phi).unwrap(), FieldModel::Point)
    }

    fn pixel(x: f64, y: f64, z: f64, area: f64) -> Pixel {
        Pixel { position: [x, y, z], normal: EZ, area }
    }

    #[test]
    fn background_counts_without_scatterer() {
        let st = setup(0.0, 3.0);
        let n = mean_counts(&pixel(0.3, -0.2, 1.0, 0.01), &st).unwrap();
        // n̄ = Φ dA when only the incident flux crosses the pixel
        assert_relative_eq!(n, 3.0 * 0.01, max_relative = 1e-14);
    }

    #[test]
    fn counts_linear_in_fluence() {
        let p = pixel(0.3, 0.1, 0.5, 0.02);
        let a = mean_counts(&p, &setup(4e-6, 1.0)).unwrap();
        let b = mean_counts(&p, &setup(4e-6, 2.0)).unwrap();
        assert_relative_eq!(b, 2.0 * a, max_relative = 1e-14);
    }

    #[test]
    fn chi0_derivative_matches_finite_difference() {
        let st = setup(3e-3, 1.0);
        for p in [pixel(0.2, 0.1, 0.4, 1.0), pixel(-1.0, 2.0, -0.7, 1.0), pixel(5.0, 0.0, 9.0, 1.0)] {
            let analytic = flux_chi0_derivative(&p, &st).unwrap();
            let h = 1e-3 * st.scatterer.chi0;
            let f = |c: f64| {
                let s = Setup { scatterer: Scatterer { chi0: c, ..st.scatterer }, ..st };
                projected_flux(&s, &p, s.scatterer.r0).unwrap().0
            };
            let fd = (f(st.scatterer.chi0 + h) - f(st.scatterer.chi0 - h)) / (2.0 * h);
            assert!((fd - analytic).abs() < 1e-6 * analytic.abs(), "{fd} vs {analytic}");
        }
    }

    #[test]
    fn chi0_derivative_at_zero_is_the_cross_term() {
        let st = setup(0.0, 1.0);
        let p = pixel(0.4, 0.3, 0.6, 1.0);
        let inc = st.incident(p.position);
        let unit = st.unit_scattered(p.position, [0.0; 3]).unwrap();
        let want = dot(poynting_terms(&inc, &unit).cross(), EZ);
        assert_eq!(flux_chi0_derivative(&p, &st).unwrap(), want);
    }

    #[test]
    fn x_derivative_is_odd_under_reflection() {
        let st = setup(3e-3, 1.0);
        let h = 1e-5;
        let a = intensity_gradient(&pixel(0.3, 0.2, 0.5, 1.0), &st, h).unwrap();
        let b = intensity_gradient(&pixel(-0.3, 0.2, 0.5, 1.0), &st, h).unwrap();
        assert!((a[1] + b[1]).abs() < 1e-8 * a[1].abs());
        assert!((a[0] - b[0]).abs() < 1e-12 * a[0].abs());
    }

    #[test]
    fn poisson_likelihood_oracle() {
        // a 3×3 toy detector with O(10) counts per pixel
        let st = setup(0.05, 30.0);
        let h = 1e-5;
        let pixels: Vec<Pixel> =
            (0..9).map(|i| pixel(0.4 * (i % 3) as f64 - 0.4, 0.4 * (i / 3) as f64 - 0.4, 0.6, 0.3)).collect();
        let fi = fi_from_pixels(&pixels, &st, h).unwrap();
        let mut brute = [[0.0; 4]; 4];
        for p in &pixels {
            let nbar = mean_counts(p, &st).unwrap();
            assert!(nbar > 1.0 && nbar < 40.0, "{nbar}");
            let g = intensity_gradient(p, &st, h).unwrap().map(|v| v * st.counts_per_flux(p));
            // Σ_n p(n) (∂ ln p)², with ∂ ln p = (n/n̄ − 1) ∂n̄
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
        for j in 0..4 {
            for l in 0..4 {
                assert!((fi.get(j, l) - brute[j][l]).abs() <= 1e-8 * fi.max_abs(), "{j}{l}");
            }
        }
    }

    #[test]
    fn crb_of_diagonal_and_coupled_matrices() {
        let mut fi = InfoMatrix::zeros(InfoKind::ClassicalFi);
        for (i, v) in [4.0, 9.0, 16.0, 25.0].iter().enumerate() {
            fi.entries[i][i] = *v;
        }
        let r = crb_from_fi(&fi, 1.0, 1.0, 1.0).unwrap();
        for (s, want) in r.sigma.iter().zip([0.5, 1.0 / 3.0, 0.25, 0.2]) {
            assert_relative_eq!(*s, want, max_relative = 1e-14);
        }
        fi.entries[0][0] = 2.0;
        fi.entries[1][1] = 2.0;
        fi.entries[0][1] = 1.0;
        fi.entries[1][0] = 1.0;
        let r = crb_from_fi(&fi, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(r.sigma[0] * r.sigma[0], 2.0 / 3.0, max_relative = 1e-13);
        let mut sing = InfoMatrix::zeros(InfoKind::ClassicalFi);
        sing.entries[0][0] = 1.0;
        assert!(matches!(crb_from_fi(&sing, 1.0, 1.0, 1.0), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn scattered_photons() {
        let st = setup(0.0, 5.0);
        assert_eq!(n_scattered(&st.scatterer, &st.pulse), 0.0);
        let s = Scatterer::new(2.0, 0.0, [0.0; 3], 10.3).unwrap();
        let pulse = Pulse::new(1.0, 100.0, 1.0).unwrap();
        let phi = 1.0 / cross_section(&s, &pulse);
        let pulse = Pulse::new(1.0, 100.0, phi).unwrap();
        assert_relative_eq!(n_scattered(&s, &pulse), 1.0, max_relative = 1e-14);
        assert_relative_eq!(cross_section(&s, &pulse), 8.0 / (3.0 * PI), max_relative = 1e-14);
    }

    #[test]
    fn fi_additive_over_pixel_sets() {
        let st = setup(3e-3, 1.0);
        let g = planar_grid(0.4, 1.5 * PI, 1, 2.0 * PI).unwrap();
        let h = fd_step(&st.pulse, 0.4);
        let (a, b) = g.pixels.split_at(g.len() / 3);
        let whole = fi_from_pixels(&g.pixels, &st, h).unwrap();
        let parts = fi_from_pixels(a, &st, h).unwrap() + fi_from_pixels(b, &st, h).unwrap();
        for j in 0..4 {
            for l in 0..4 {
                assert!((whole.get(j, l) - parts.get(j, l)).abs() <= 1e-12 * whole.max_abs());
            }
        }
        assert!(whole.asymmetry() == 0.0);
        assert!(whole.is_psd(1e-10));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn fi_linear_in_fluence(phi in 0.1f64..100.0) {
            let p: Vec<Pixel> = (0..5).map(|i| pixel(0.2 * i as f64, 0.1, 0.7, 0.05)).collect();
            let a = fi_from_pixels(&p, &setup(3e-3, 1.0), 1e-5).unwrap();
            let b = fi_from_pixels(&p, &setup(3e-3, phi), 1e-5).unwrap();
            for j in 0..4 {
                for l in 0..4 {
                    prop_assert!((b.get(j, l) - phi * a.get(j, l)).abs() <= 1e-10 * b.max_abs());
                }
            }
        }
    }
}

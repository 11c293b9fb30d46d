//! Sweeps behind the figures: CRB against detector distance, QFI against time,
//! peak QFI against scatterer size, plus the validation suite.
//!
//! Sweep points are independent and run in parallel; results are collected in
//! axis order so identical configurations give identical results.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::detector::{hemisphere_grid, planar_grid, Orientation, PixelGrid};
use crate::fields::{is_extrapolated, FieldModel};
use crate::fisher::{crb_from_fi, fi_matrix, n_scattered, CrbResult, Setup};
use crate::model::{InfoMatrix, Pulse, Scatterer};
use crate::oracles;
use crate::qfi::{farfield_normalized_bounds, farfield_qfi, qfi_matrix, xi_regularizer, Gauge, SpectralPulse};
use crate::quadrature::{GridSpec, SinhGrid};
use crate::{Error, Result};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default sweep densities.
pub const DISTANCES_PER_DECADE: usize = 40;
pub const SAMPLES_PER_PERIOD: usize = 8;
pub const SIZES_PER_FIT: usize = 8;

/// RMS of the log–log fit above which a power law is flagged.
pub const FIT_RESIDUAL_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub name: String,
    /// `n` in `y ∝ x^n`.
    pub exponent: f64,
    pub prefactor: f64,
    /// RMS residual of `ln y`.
    pub residual: f64,
    /// Points dropped from the small-`x` end.
    pub excluded: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: Column,
    pub columns: Vec<Column>,
    pub metadata: Vec<(String, String)>,
    pub fits: Vec<PowerLawFit>,
}

impl SweepResult {
    fn new(name: &str, unit: &str, values: Vec<f64>) -> Self {
        let axis = Column { name: name.into(), unit: unit.into(), values };
        let metadata = vec![("code_version".into(), CODE_VERSION.into())];
        Self { axis, columns: Vec::new(), metadata, fits: Vec::new() }
    }

    fn push(&mut self, name: impl Into<String>, unit: &str, values: Vec<f64>) {
        assert_eq!(values.len(), self.axis.values.len(), "column length must match the axis");
        self.columns.push(Column { name: name.into(), unit: unit.into(), values });
    }

    fn note(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    pub fn len(&self) -> usize {
        self.axis.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.values.is_empty()
    }

    /// Axis or data column by name.
    pub fn column(&self, name: &str) -> Option<&Column> {
        std::iter::once(&self.axis).chain(&self.columns).find(|c| c.name == name)
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn fit(&self, name: &str) -> Option<&PowerLawFit> {
        self.fits.iter().find(|f| f.name == name)
    }
}

/// `count` points log-spaced over `[lo, hi]`, endpoints included.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| match i {
            0 => lo,
            _ if i == count - 1 => hi,
            _ => (a + (b - a) * i as f64 / (count - 1) as f64).exp(),
        })
        .collect()
}

/// Point count for `per_decade` log-spaced points on `[lo, hi]`.
pub fn points_for_decades(lo: f64, hi: f64, per_decade: usize) -> usize {
    ((hi / lo).log10() * per_decade as f64).round() as usize + 1
}

/// Least-squares line through `(ln x, ln |y|)`: slope, intercept and RMS residual.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Config(format!("power-law fit needs matching data, got {} and {}", x.len(), y.len())));
    }
    if x.iter().chain(y).any(|v| *v == 0.0 || !v.is_finite()) || x.iter().any(|v| *v < 0.0) {
        return Err(Error::Domain("power-law fit needs finite, nonzero data and positive x".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (lx.iter().zip(&ly).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum::<f64>() / n).sqrt();
    Ok((slope, icpt, rms))
}

/// Power-law fit of `y` against `x` (sorted by increasing `x`). The two smallest-`x`
/// points are dropped when that shrinks the residual more than twofold.
pub fn fit_power_law(name: &str, x: &[f64], y: &[f64], threshold: f64) -> Result<PowerLawFit> {
    let (mut slope, mut icpt, mut res) = loglog_fit(x, y)?;
    let mut excluded = 0;
    if x.len() >= 6 {
        let (s2, i2, r2) = loglog_fit(&x[2..], &y[2..])?;
        if r2 * 2.0 < res {
            (slope, icpt, res, excluded) = (s2, i2, r2, 2);
        }
    }
    Ok(PowerLawFit {
        name: name.into(),
        exponent: slope,
        prefactor: icpt.exp(),
        residual: res,
        excluded,
        flagged: res > threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    Planar,
    Hemisphere,
}

/// CRB against detector distance; all lengths in internal units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrbSweepConfig {
    pub scatterer: Scatterer,
    /// Size of the finite scatterer in the `finite` columns.
    pub a0_finite: f64,
    pub pulse: Pulse,
    pub detector: DetectorKind,
    pub solid_angle: f64,
    pub refinement: u32,
    pub distance_min: f64,
    pub distance_max: f64,
    pub points_per_decade: usize,
}

const PARAM_TAGS: [&str; 4] = ["chi", "x", "y", "z"];

fn detector_grid(cfg: &CrbSweepConfig, d: f64, forward: bool, refinement: u32) -> Result<PixelGrid> {
    let lambda = cfg.pulse.wavelength();
    match cfg.detector {
        DetectorKind::Planar => planar_grid(if forward { d } else { -d }, cfg.solid_angle, refinement, lambda),
        DetectorKind::Hemisphere => {
            let o = if forward { Orientation::Forward } else { Orientation::Backward };
            hemisphere_grid(d, o, cfg.solid_angle, refinement, lambda)
        }
    }
}

fn crb_on(grid: &PixelGrid, cfg: &CrbSweepConfig, a0: f64) -> Result<CrbResult> {
    let s = Scatterer { a0, ..cfg.scatterer };
    let model = if a0 > 0.0 { FieldModel::Regularized } else { FieldModel::Point };
    let fi = fi_matrix(grid, &Setup::new(s, cfg.pulse, model))?;
    crb_from_fi(&fi, n_scattered(&s, &cfg.pulse), s.chi0, cfg.pulse.wavelength())
}

struct CrbPoint {
    fwd: CrbResult,
    bwd: CrbResult,
    finite: CrbResult,
    pixels: usize,
    refine_delta: f64,
}

fn crb_point(cfg: &CrbSweepConfig, d: f64) -> Result<CrbPoint> {
    let fwd_grid = detector_grid(cfg, d, true, cfg.refinement)?;
    let fwd = crb_on(&fwd_grid, cfg, 0.0)?;
    let bwd = crb_on(&detector_grid(cfg, d, false, cfg.refinement)?, cfg, 0.0)?;
    let finite = crb_on(&fwd_grid, cfg, cfg.a0_finite)?;
    // compare against the neighbouring refinement level
    let other = if cfg.refinement > 1 { cfg.refinement - 1 } else { 2 };
    let alt = crb_on(&detector_grid(cfg, d, true, other)?, cfg, 0.0)?;
    let refine_delta = (0..4).fold(0.0_f64, |m, i| m.max((alt.normalized[i] / fwd.normalized[i] - 1.0).abs()));
    Ok(CrbPoint { fwd, bwd, finite, pixels: fwd_grid.len(), refine_delta })
}

pub fn crb_distance_sweep(cfg: &CrbSweepConfig) -> Result<SweepResult> {
    if !(cfg.distance_min > 0.0 && cfg.distance_max >= cfg.distance_min && cfg.points_per_decade > 0) {
        return Err(Error::Config(format!(
            "distance range [{}, {}] with {} points per decade is not a valid sweep",
            cfg.distance_min, cfg.distance_max, cfg.points_per_decade
        )));
    }
    let lambda = cfg.pulse.wavelength();
    let n = points_for_decades(cfg.distance_min, cfg.distance_max, cfg.points_per_decade);
    let d = log_spaced(cfg.distance_min, cfg.distance_max, n);
    let points = d.par_iter().map(|&d| crb_point(cfg, d)).collect::<Result<Vec<_>>>()?;

    let axis_name = match cfg.detector {
        DetectorKind::Planar => "Z_over_lambda",
        DetectorKind::Hemisphere => "R_over_lambda",
    };
    let mut out = SweepResult::new(axis_name, "1", d.iter().map(|v| v / lambda).collect());
    for (tag, pick) in [
        ("fwd", (|p: &CrbPoint| p.fwd) as fn(&CrbPoint) -> CrbResult),
        ("bwd", |p: &CrbPoint| p.bwd),
        ("finite", |p: &CrbPoint| p.finite),
    ] {
        for (i, name) in PARAM_TAGS.iter().enumerate() {
            out.push(format!("crb_{name}_norm_{tag}"), "1", points.iter().map(|p| pick(p).normalized[i]).collect());
        }
    }
    let q = farfield_normalized_bounds(cfg.pulse.k_in);
    for (i, name) in PARAM_TAGS.iter().enumerate() {
        out.push(format!("qcrb_{name}_norm"), "1", vec![q[i]; n]);
    }
    out.push("pixels", "1", points.iter().map(|p| p.pixels as f64).collect());
    out.push("refine_delta_fwd", "1", points.iter().map(|p| p.refine_delta).collect());
    out.push(
        "finite_extrapolated",
        "1",
        d.iter().map(|&d| if is_extrapolated(d, cfg.a0_finite) { 1.0 } else { 0.0 }).collect(),
    );
    out.note("sweep", "crb-distance");
    out.note("config", serde_json::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?);
    Ok(out)
}

/// One wavelength in a QFI time sweep, in its own internal units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QfiRun {
    pub label: String,
    pub scatterer: Scatterer,
    pub pulse: Pulse,
    /// Nanometres per internal length.
    pub length_unit_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QfiTimeConfig {
    pub runs: Vec<QfiRun>,
    pub gauges: Vec<Gauge>,
    /// Covariance corrections, applied in the PZW gauge only.
    pub corrections: bool,
    pub grid: GridSpec,
    pub t_min_over_tau: f64,
    pub t_max_over_tau: f64,
    pub samples_per_period: usize,
}

fn gauge_tag(g: Gauge) -> &'static str {
    match g {
        Gauge::Pzw => "pzw",
        Gauge::Coulomb => "coulomb",
    }
}

/// Coarser grid used for the per-point convergence indicator.
fn coarse(grid: &GridSpec) -> GridSpec {
    GridSpec { d_over_k0: 2.0 * grid.d_over_k0, delta: 2.0 * grid.delta, ..*grid }
}

/// Far-field QFI of the same scatterer: the point-dipole value times `ξ_k⁴`.
pub fn farfield_reference(s: &Scatterer, pulse: &Pulse) -> InfoMatrix {
    farfield_qfi(s, pulse).scaled(xi_regularizer(pulse.k_in, s.a0).powi(4))
}

/// Entries `(J₀₀, J₁₁, J₂₂, J₃₃, J₀₃)` with their length powers.
const ENTRIES: [(&str, usize, usize, i32); 5] =
    [("J00", 0, 0, 6), ("J11", 1, 1, 2), ("J22", 2, 2, 2), ("J33", 3, 3, 2), ("J03", 0, 3, 4)];

pub fn qfi_time_sweep(cfg: &QfiTimeConfig) -> Result<SweepResult> {
    if cfg.runs.is_empty() || cfg.gauges.is_empty() || cfg.samples_per_period == 0 {
        return Err(Error::Config("qfi time sweep needs at least one run, one gauge and a sampling rate".into()));
    }
    if !(cfg.t_max_over_tau > cfg.t_min_over_tau) {
        return Err(Error::Config("qfi time sweep needs t_max > t_min".into()));
    }
    // the shortest optical period sets the step
    let dt = cfg
        .runs
        .iter()
        .map(|r| 2.0 * PI / (r.pulse.k_in * r.pulse.tau) / cfg.samples_per_period as f64)
        .fold(f64::INFINITY, f64::min);
    let n = ((cfg.t_max_over_tau - cfg.t_min_over_tau) / dt).floor() as usize + 1;
    let times: Vec<f64> = (0..n).map(|i| cfg.t_min_over_tau + i as f64 * dt).collect();
    let mut out = SweepResult::new("t_over_tau", "1", times.clone());

    for run in &cfg.runs {
        let sp = SpectralPulse::new(&run.pulse);
        let grid = cfg.grid.build(run.pulse.k_in)?;
        let rough = coarse(&cfg.grid).build(run.pulse.k_in)?;
        let far = farfield_reference(&run.scatterer, &run.pulse);
        let l = run.length_unit_nm;
        for &g in &cfg.gauges {
            let corr = cfg.corrections && g == Gauge::Pzw;
            let eval = |grid: &SinhGrid| -> Result<Vec<InfoMatrix>> {
                times.par_iter().map(|&t| qfi_matrix(t * run.pulse.tau, &sp, &run.scatterer, g, corr, grid)).collect()
            };
            let mats = eval(&grid)?;
            let rough_mats = eval(&rough)?;
            let tag = format!("{}_{}", gauge_tag(g), run.label);
            for (name, j, k, pow) in ENTRIES {
                let unit = format!("nm^-{pow}");
                out.push(format!("{name}_{tag}"), &unit, mats.iter().map(|m| m.get(j, k) / l.powi(pow)).collect());
            }
            for (name, j, _, _) in &ENTRIES[..4] {
                let norm: Vec<f64> = mats.iter().map(|m| m.get(*j, *j) / far.get(*j, *j)).collect();
                let (imax, peak) =
                    norm.iter().enumerate().fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
                out.note(format!("peak_ratio_{name}_{tag}"), peak);
                out.note(format!("peak_t_over_tau_{name}_{tag}"), times[imax]);
                out.push(format!("{name}_norm_{tag}"), "1", norm);
            }
            let delta = mats
                .iter()
                .zip(&rough_mats)
                .map(|(a, b)| {
                    [0usize, 1, 3].iter().fold(0.0_f64, |m, &i| m.max((b.get(i, i) / a.get(i, i) - 1.0).abs()))
                })
                .collect();
            out.push(format!("grid_delta_{tag}"), "1", delta);
        }
        out.note(format!("grid_nodes_{}", run.label), grid.len());
    }
    if cfg.corrections && cfg.gauges.contains(&Gauge::Coulomb) {
        out.note("corrections", "pzw only");
    }
    out.note("sweep", "qfi-time");
    out.note("config", serde_json::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?);
    Ok(out)
}

/// Peak QFI against scatterer size; `a0_values` in internal units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeScalingConfig {
    pub scatterer: Scatterer,
    pub pulse: Pulse,
    pub a0_values: Vec<f64>,
    pub gauges: Vec<Gauge>,
    pub grid: GridSpec,
    /// Evaluation time in units of `τ`; the peak sits at 0.
    pub t_over_tau: f64,
    pub residual_threshold: f64,
}

/// Entries fitted in a size sweep.
const FIT_ENTRIES: [(&str, usize, usize); 4] = [("J00", 0, 0), ("J11", 1, 1), ("J33", 3, 3), ("J03", 0, 3)];

pub fn size_scaling_sweep(cfg: &SizeScalingConfig) -> Result<SweepResult> {
    let lambda = cfg.pulse.wavelength();
    if cfg.a0_values.len() < 2 || cfg.gauges.is_empty() {
        return Err(Error::Config("size sweep needs at least two sizes and one gauge".into()));
    }
    if cfg.a0_values.iter().any(|&a| !(a >= lambda / 200.0 * (1.0 - 1e-12) && a <= lambda / 10.0 * (1.0 + 1e-12))) {
        return Err(Error::Config("scatterer sizes must lie within [λ/200, λ/10]".into()));
    }
    // ascending λ/a₀, so the largest sizes come first
    let mut a0 = cfg.a0_values.clone();
    a0.sort_by(|a, b| b.total_cmp(a));
    let x: Vec<f64> = a0.iter().map(|a| lambda / a).collect();
    let mut out = SweepResult::new("lambda_over_a0", "1", x.clone());
    out.push("a0_over_lambda", "1", a0.iter().map(|a| a / lambda).collect());
    let sp = SpectralPulse::new(&cfg.pulse);
    let grid = cfg.grid.build(cfg.pulse.k_in)?;
    let t = cfg.t_over_tau * cfg.pulse.tau;
    for &g in &cfg.gauges {
        let mats = a0
            .par_iter()
            .map(|&a| qfi_matrix(t, &sp, &Scatterer { a0: a, ..cfg.scatterer }, g, false, &grid))
            .collect::<Result<Vec<_>>>()?;
        let far = farfield_qfi(&cfg.scatterer, &cfg.pulse);
        for (name, j, k) in FIT_ENTRIES {
            let raw: Vec<f64> = mats.iter().map(|m| m.get(j, k)).collect();
            let col = format!("{name}_{}", gauge_tag(g));
            let fit = fit_power_law(&col, &x, &raw, cfg.residual_threshold)?;
            out.note(format!("exponent_{col}"), fit.exponent);
            out.note(format!("fit_residual_{col}"), fit.residual);
            out.note(format!("fit_excluded_{col}"), fit.excluded);
            if fit.flagged {
                out.note(format!("fit_flagged_{col}"), "residual above threshold");
            }
            out.fits.push(fit);
            if j == k {
                out.push(format!("{col}_norm"), "1", raw.iter().map(|v| v / far.get(j, j)).collect());
            }
            out.push(col, "internal", raw);
        }
    }
    out.note("sweep", "size-scaling");
    out.note("config", serde_json::to_string(cfg).map_err(|e| Error::Config(e.to_string()))?);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Level {
    Quick,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub level: Level,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs every oracle; an oracle that errors counts as failed with an infinite error.
pub fn validate_suite(level: Level) -> ValidationReport {
    let lambda = 2.0 * PI;
    let dense = match level {
        Level::Quick => 100_000,
        Level::Full => 400_000,
    };
    let radius = match level {
        Level::Quick => 10.0 * lambda,
        Level::Full => 40.0 * lambda,
    };
    let mut runs: Vec<(&str, f64, Box<dyn Fn() -> Result<f64> + Sync>)> = vec![
        ("pv_log_case", 1e-8, Box::new(oracles::pv_log_case)),
        ("sokhotski_plemelj_limit", 1e-4, Box::new(oracles::sokhotski_limit)),
        ("dense_grid_f2", 1e-4, Box::new(move || oracles::dense_f_function(dense))),
        ("fd_chi0_gradient", 1e-6, Box::new(oracles::fd_chi0_gradient)),
        ("energy_conservation", 5e-3, Box::new(move || oracles::energy_conservation(radius))),
        ("mode_integral_field", 1e-3, Box::new(move || oracles::mode_integral_vs_closed_form(lambda / 30.0))),
        ("poisson_likelihood_fi", 1e-8, Box::new(oracles::poisson_likelihood)),
    ];
    if level == Level::Full {
        runs.push((
            "mode_integral_field_small",
            1e-3,
            Box::new(move || oracles::mode_integral_vs_closed_form(lambda / 100.0)),
        ));
        runs.push(("point_dipole_limit", 1e-3, Box::new(|| oracles::point_limit(0.01).map(|(a, b)| a.max(b)))));
    }
    let checks = runs
        .par_iter()
        .map(|(name, tol, f)| {
            let measured = f().unwrap_or(f64::INFINITY);
            Check { name: (*name).into(), measured, tolerance: *tol, passed: measured < *tol }
        })
        .collect();
    ValidationReport { level, checks }
}

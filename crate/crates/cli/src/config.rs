//! Run configuration: a JSON document layered over a named preset, with
//! `--set key=value` overrides applied last.

use std::f64::consts::PI;
use std::path::Path;

use dipole_bounds::model::{Pulse, QuantityKind, Scatterer, UnitSystem};
use dipole_bounds::qfi::{Gauge, SpectralPulse};
use dipole_bounds::quadrature::GridSpec;
use dipole_bounds::scenarios::{DetectorKind, Level};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScattererBlock {
    pub chi0_nm3: f64,
    /// Size of the regularized scatterer.
    pub a0_nm: f64,
    /// Resonance wavelength `2πc/ω₀`.
    pub resonance_nm: f64,
    pub position_nm: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Fluence {
    /// Photons per μm².
    PhiPerUm2(f64),
    /// Fluence chosen so that `N^sc = σ_tot Φ` takes this value.
    NscTarget(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseBlock {
    pub lambda_nm: f64,
    pub tau_fs: f64,
    pub fluence: Fluence,
    /// Optional second wavelength for time sweeps.
    pub lambda2_nm: Option<f64>,
    /// `Φ₂/Φ₁` in photons per area; defaults to `λ₂/λ₁`.
    pub fluence2_over_fluence1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorBlock {
    #[serde(rename = "type")]
    pub kind: DetectorKind,
    /// Single planar distance; the distance range in `run` is used when absent.
    pub distance_um: Option<f64>,
    /// Single hemisphere radius.
    pub radius_um: Option<f64>,
    pub solid_angle_over_pi: f64,
    pub refinement: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub out_dir: String,
    pub gauges: Vec<Gauge>,
    pub corrections: bool,
    pub distance_min_over_lambda: f64,
    pub distance_max_over_lambda: f64,
    pub points_per_decade: usize,
    pub t_min_over_tau: f64,
    pub t_max_over_tau: f64,
    pub samples_per_period: usize,
    pub a0_min_over_lambda: f64,
    pub a0_max_over_lambda: f64,
    pub sizes: usize,
    pub level: Level,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scatterer: ScattererBlock,
    pub pulse: PulseBlock,
    pub detector: DetectorBlock,
    pub grid: GridSpec,
    pub run: RunBlock,
}

pub const PRESETS: [&str; 5] = ["fig2", "fig3", "fig3-12.6", "hemisphere", "size"];

/// The defaults: planar detector at `Ω = 1.97π`, `χ₀ = 13.0 nm³`, `λ = 1.03 μm`.
pub fn fig2() -> RunConfig {
    RunConfig {
        scatterer: ScattererBlock { chi0_nm3: 13.0, a0_nm: 35.0, resonance_nm: 100.0, position_nm: [0.0; 3] },
        pulse: PulseBlock {
            lambda_nm: 1030.0,
            tau_fs: 24.0,
            fluence: Fluence::NscTarget(1.0),
            lambda2_nm: None,
            fluence2_over_fluence1: None,
        },
        detector: DetectorBlock {
            kind: DetectorKind::Planar,
            distance_um: None,
            radius_um: None,
            solid_angle_over_pi: 1.97,
            refinement: 2,
        },
        grid: GridSpec::default(),
        run: RunBlock {
            out_dir: "out".into(),
            gauges: vec![Gauge::Pzw],
            corrections: false,
            distance_min_over_lambda: 0.02,
            distance_max_over_lambda: 10.0,
            points_per_decade: 40,
            t_min_over_tau: -3.0,
            t_max_over_tau: 5.0,
            samples_per_period: 8,
            a0_min_over_lambda: 1.0 / 120.0,
            a0_max_over_lambda: 1.0 / 20.0,
            sizes: 8,
            level: Level::Quick,
        },
    }
}

pub fn preset(name: &str) -> Result<RunConfig, CliError> {
    let mut c = fig2();
    match name {
        "fig2" => {}
        // τ = 24 fs at 1.03 μm and 4.5 μm, a₀ = 35 nm
        "fig3" => c.pulse.lambda2_nm = Some(4500.0),
        // same pulses with the 12.6 nm³ polarizability
        "fig3-12.6" => {
            c.pulse.lambda2_nm = Some(4500.0);
            c.scatterer.chi0_nm3 = 12.6;
        }
        "hemisphere" => {
            c.detector.kind = DetectorKind::Hemisphere;
            c.detector.solid_angle_over_pi = 1.84;
        }
        "size" => {
            c.pulse.lambda_nm = 532.0;
            c.scatterer.a0_nm = 532.0 / 30.0;
            c.run.gauges = vec![Gauge::Pzw, Gauge::Coulomb];
        }
        other => {
            return Err(CliError::Schema(format!("unknown preset `{other}`; expected one of {}", PRESETS.join(", "))))
        }
    }
    Ok(c)
}

/// Blocks holding a one-of choice are replaced, never merged.
const CHOICE_BLOCKS: [&str; 1] = ["fluence"];

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() && !CHOICE_BLOCKS.contains(&k.as_str()) => {
                        merge(slot, v)
                    }
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// `a.b.c=value`; the value is read as JSON and falls back to a plain string.
fn apply_set(doc: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Schema(format!("--set expects key=value, got `{assignment}`")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    let mut node = doc;
    for (i, key) in keys.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Schema(format!("`{}` is not a block", keys[..i].join("."))))?;
        if i + 1 == keys.len() {
            if i > 0 && CHOICE_BLOCKS.contains(&keys[i - 1]) {
                obj.clear();
            }
            obj.insert((*key).to_string(), value);
            return Ok(());
        }
        node = obj.entry((*key).to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Err(CliError::Schema("--set needs a non-empty key".into()))
}

/// Layers the file and the overrides over the preset and validates the result.
pub fn parse_config(path: Option<&Path>, preset_name: &str, sets: &[String]) -> Result<RunConfig, CliError> {
    let mut doc = serde_json::to_value(preset(preset_name)?).expect("presets serialize");
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        if !text.trim().is_empty() {
            let file: Value =
                serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", p.display())))?;
            if !file.is_object() {
                return Err(CliError::Schema(format!("{}: top level must be an object", p.display())));
            }
            merge(&mut doc, file);
        }
    }
    for s in sets {
        apply_set(&mut doc, s)?;
    }
    let cfg: RunConfig = serde_path_to_error::deserialize(doc)
        .map_err(|e| CliError::Schema(format!("at `{}`: {}", e.path(), e.inner())))?;
    validate(&cfg)?;
    Ok(cfg)
}

fn positive(path: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Schema(format!("at `{path}`: must be positive, got {v}")))
    }
}

pub fn validate(c: &RunConfig) -> Result<(), CliError> {
    positive("scatterer.chi0_nm3", c.scatterer.chi0_nm3)?;
    if !(c.scatterer.a0_nm >= 0.0) {
        return Err(CliError::Schema(format!("at `scatterer.a0_nm`: must be non-negative, got {}", c.scatterer.a0_nm)));
    }
    positive("scatterer.resonance_nm", c.scatterer.resonance_nm)?;
    positive("pulse.lambda_nm", c.pulse.lambda_nm)?;
    positive("pulse.tau_fs", c.pulse.tau_fs)?;
    match c.pulse.fluence {
        Fluence::PhiPerUm2(v) => positive("pulse.fluence.phi_per_um2", v)?,
        Fluence::NscTarget(v) => positive("pulse.fluence.nsc_target", v)?,
    }
    if let Some(l2) = c.pulse.lambda2_nm {
        positive("pulse.lambda2_nm", l2)?;
    }
    if let Some(r) = c.pulse.fluence2_over_fluence1 {
        positive("pulse.fluence2_over_fluence1", r)?;
    }
    let omega = c.detector.solid_angle_over_pi;
    if !(omega > 0.0 && omega < 2.0) {
        return Err(CliError::Schema(format!("at `detector.solid_angle_over_pi`: must lie in (0, 2), got {omega}")));
    }
    if !(1..=12).contains(&c.detector.refinement) {
        return Err(CliError::Schema(format!(
            "at `detector.refinement`: must lie in 1..=12, got {}",
            c.detector.refinement
        )));
    }
    match c.detector.kind {
        DetectorKind::Planar if c.detector.radius_um.is_some() => {
            return Err(CliError::Schema("at `detector.radius_um`: only valid for a hemisphere".into()))
        }
        DetectorKind::Hemisphere if c.detector.distance_um.is_some() => {
            return Err(CliError::Schema("at `detector.distance_um`: only valid for a planar detector".into()))
        }
        _ => {}
    }
    if let Some(d) = c.detector.distance_um.or(c.detector.radius_um) {
        positive("detector distance", d)?;
    }
    positive("grid.d_over_k0", c.grid.d_over_k0)?;
    positive("grid.delta", c.grid.delta)?;
    if !(c.grid.kmax_over_k0 > 1.0) {
        return Err(CliError::Schema(format!("at `grid.kmax_over_k0`: must exceed 1, got {}", c.grid.kmax_over_k0)));
    }
    let r = &c.run;
    positive("run.distance_min_over_lambda", r.distance_min_over_lambda)?;
    if !(r.distance_max_over_lambda >= r.distance_min_over_lambda) {
        return Err(CliError::Schema("at `run.distance_max_over_lambda`: below the minimum".into()));
    }
    if !(r.t_max_over_tau > r.t_min_over_tau) {
        return Err(CliError::Schema("at `run.t_max_over_tau`: must exceed run.t_min_over_tau".into()));
    }
    if r.points_per_decade == 0 || r.samples_per_period == 0 {
        return Err(CliError::Schema("at `run`: sampling densities must be positive".into()));
    }
    if r.sizes < 2 {
        return Err(CliError::Schema(format!("at `run.sizes`: need at least 2, got {}", r.sizes)));
    }
    if !(r.a0_min_over_lambda >= 1.0 / 200.0
        && r.a0_max_over_lambda <= 0.1
        && r.a0_min_over_lambda < r.a0_max_over_lambda)
    {
        return Err(CliError::Schema("at `run.a0_min_over_lambda`: size range must lie within [1/200, 1/10]".into()));
    }
    if r.gauges.is_empty() {
        return Err(CliError::Schema("at `run.gauges`: need at least one gauge".into()));
    }
    for l in std::iter::once(c.pulse.lambda_nm).chain(c.pulse.lambda2_nm) {
        let p = physical(c, l)?;
        let band = SpectralPulse::new(&p.pulse).band().1;
        if band >= p.scatterer.omega0 {
            return Err(CliError::Physics(format!(
                "resonance at {} nm lies inside the band of the {l} nm pulse",
                c.scatterer.resonance_nm
            )));
        }
    }
    Ok(())
}

/// A configuration converted to internal units for one incident wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physical {
    pub units: UnitSystem,
    pub scatterer: Scatterer,
    pub pulse: Pulse,
    /// Nanometres per internal length.
    pub length_unit_nm: f64,
}

impl Physical {
    pub fn lambda(&self) -> f64 {
        2.0 * PI / self.pulse.k_in
    }
}

fn physics_err(e: dipole_bounds::Error) -> CliError {
    CliError::from(e)
}

/// Internal-unit scatterer and pulse at wavelength `lambda_nm`.
pub fn physical(c: &RunConfig, lambda_nm: f64) -> Result<Physical, CliError> {
    let u = UnitSystem::from_wavelength(lambda_nm * 1e-9).map_err(physics_err)?;
    let len = |nm: f64| u.to_internal(nm * 1e-9, QuantityKind::Length);
    let chi0 = u.to_internal(c.scatterer.chi0_nm3 * 1e-27, QuantityKind::Polarizability);
    let r0 = c.scatterer.position_nm.map(len);
    let omega0 = lambda_nm / c.scatterer.resonance_nm;
    let s = Scatterer::new(chi0, len(c.scatterer.a0_nm), r0, omega0).map_err(physics_err)?;
    let tau = u.to_internal(c.pulse.tau_fs * 1e-15, QuantityKind::Time);
    let k = u.k_in();
    let base = lambda_nm == c.pulse.lambda_nm;
    // fluence of the primary pulse in photons per m²
    let phi1_si = match c.pulse.fluence {
        Fluence::PhiPerUm2(v) => v * 1e12,
        Fluence::NscTarget(n) => {
            let u1 = UnitSystem::from_wavelength(c.pulse.lambda_nm * 1e-9).map_err(physics_err)?;
            let chi1 = u1.to_internal(c.scatterer.chi0_nm3 * 1e-27, QuantityKind::Polarizability);
            let sigma1 = 2.0 * chi1 * chi1 / (3.0 * PI);
            u1.from_internal(n / sigma1, QuantityKind::Fluence)
        }
    };
    let phi_si =
        if base { phi1_si } else { phi1_si * c.pulse.fluence2_over_fluence1.unwrap_or(lambda_nm / c.pulse.lambda_nm) };
    let phi = u.to_internal(phi_si, QuantityKind::Fluence);
    let pulse = Pulse::new(k, tau, phi).map_err(physics_err)?;
    Ok(Physical { units: u, scatterer: s, pulse, length_unit_nm: u.length_unit * 1e9 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for p in PRESETS {
            validate(&preset(p).unwrap()).unwrap();
        }
    }

    #[test]
    fn set_overrides_nested_keys() {
        let c =
            parse_config(None, "fig2", &["detector.solid_angle_over_pi=1.5".into(), "run.gauges=[\"coulomb\"]".into()])
                .unwrap();
        assert_eq!(c.detector.solid_angle_over_pi, 1.5);
        assert_eq!(c.run.gauges, vec![Gauge::Coulomb]);
    }

    #[test]
    fn fluence_choice_is_replaced() {
        let c = parse_config(None, "fig2", &["pulse.fluence.phi_per_um2=5".into()]).unwrap();
        assert_eq!(c.pulse.fluence, Fluence::PhiPerUm2(5.0));
    }

    #[test]
    fn unknown_keys_rejected_with_path() {
        let e = parse_config(None, "fig2", &["scatterer.radius_nm=3".into()]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = parse_config(None, "fig2", &["pulse.tau_fs=\"long\"".into()]).unwrap_err();
        assert!(e.to_string().contains("pulse.tau_fs"), "{e}");
    }

    #[test]
    fn nsc_target_fixes_scattered_photons() {
        let c = preset("fig2").unwrap();
        let p = physical(&c, c.pulse.lambda_nm).unwrap();
        let n = dipole_bounds::fisher::n_scattered(&p.scatterer, &p.pulse);
        assert!((n - 1.0).abs() < 1e-12, "{n}");
    }

    #[test]
    fn second_wavelength_gets_scaled_fluence() {
        let c = preset("fig3").unwrap();
        let a = physical(&c, 1030.0).unwrap();
        let b = physical(&c, 4500.0).unwrap();
        let phi_a = a.units.from_internal(a.pulse.phi, QuantityKind::Fluence);
        let phi_b = b.units.from_internal(b.pulse.phi, QuantityKind::Fluence);
        assert!((phi_b / phi_a - 4500.0 / 1030.0).abs() < 1e-12);
        assert!((a.scatterer.omega0 - 10.3).abs() < 1e-12);
    }

    #[test]
    fn resonance_inside_band_is_a_physics_error() {
        let e = parse_config(None, "fig2", &["scatterer.resonance_nm=1000".into()]).unwrap_err();
        assert_eq!(e.exit_code(), 3);
    }
}

//! Subcommand dispatch.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use dipole_bounds::model::QuantityKind;
use dipole_bounds::qfi::farfield_normalized_bounds;
use dipole_bounds::scenarios::{
    crb_distance_sweep, log_spaced, qfi_time_sweep, size_scaling_sweep, validate_suite, CrbSweepConfig, QfiRun,
    QfiTimeConfig, SizeScalingConfig, SweepResult, CODE_VERSION, FIT_RESIDUAL_THRESHOLD,
};
use serde_json::{json, Map, Value};

use crate::config::{physical, RunConfig};
use crate::output::{emit, PlotSpec, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    CrbScan,
    QfiTime,
    SizeScan,
    Farfield,
    Validate,
}

impl Subcommand {
    pub const ALL: [Subcommand; 5] =
        [Subcommand::CrbScan, Subcommand::QfiTime, Subcommand::SizeScan, Subcommand::Farfield, Subcommand::Validate];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::CrbScan => "crb-scan",
            Subcommand::QfiTime => "qfi-time",
            Subcommand::SizeScan => "size-scan",
            Subcommand::Farfield => "farfield",
            Subcommand::Validate => "validate",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Everything a subcommand produces before it is written out.
#[derive(Debug, Clone)]
pub struct Report {
    pub table: Table,
    pub plot: PlotSpec,
    pub metadata: Vec<(String, String)>,
    pub fits: Value,
    /// Human-readable summary for stdout.
    pub summary: String,
    pub failed: bool,
}

impl Report {
    fn from_sweep(r: &SweepResult, plot: PlotSpec, summary: String) -> Self {
        Self {
            table: Table::from(r),
            plot,
            metadata: r.metadata.clone(),
            fits: serde_json::to_value(&r.fits).unwrap_or(Value::Null),
            summary,
            failed: false,
        }
    }
}

pub fn compute(sub: Subcommand, cfg: &RunConfig) -> Result<Report, CliError> {
    match sub {
        Subcommand::CrbScan => crb_scan(cfg),
        Subcommand::QfiTime => qfi_time(cfg),
        Subcommand::SizeScan => size_scan(cfg),
        Subcommand::Farfield => farfield(cfg),
        Subcommand::Validate => validate(cfg),
    }
}

/// The resolved configuration plus versions and sweep metadata.
pub fn resolved_document(sub: Subcommand, cfg: &RunConfig, report: &Report) -> Value {
    let mut meta = Map::new();
    for (k, v) in &report.metadata {
        // nested configs are stored as JSON text
        let value = if k == "config" { serde_json::from_str(v).unwrap_or(json!(v)) } else { json!(v) };
        meta.insert(k.clone(), value);
    }
    json!({
        "subcommand": sub.name(),
        "versions": {
            "dipole-bounds": CODE_VERSION,
            "dipole-bounds-cli": env!("CARGO_PKG_VERSION"),
        },
        "config": cfg,
        "metadata": meta,
        "fits": report.fits,
    })
}

/// Computes, writes the outputs into `out`, and prints the summary.
pub fn execute(sub: Subcommand, cfg: &RunConfig, out: &Path) -> Result<Report, CliError> {
    let report = compute(sub, cfg)?;
    emit(out, &report.table, &report.plot, &resolved_document(sub, cfg, &report))?;
    print!("{}", report.summary);
    if report.failed {
        return Err(CliError::ValidationFailed("see the failed checks above".into()));
    }
    Ok(report)
}

const TAGS: [&str; 4] = ["chi", "x", "y", "z"];

fn crb_scan(cfg: &RunConfig) -> Result<Report, CliError> {
    let p = physical(cfg, cfg.pulse.lambda_nm)?;
    let lambda = p.lambda();
    let um = |v: f64| p.units.to_internal(v * 1e-6, QuantityKind::Length);
    let (lo, hi) = match cfg.detector.distance_um.or(cfg.detector.radius_um) {
        Some(d) => (um(d), um(d)),
        None => (cfg.run.distance_min_over_lambda * lambda, cfg.run.distance_max_over_lambda * lambda),
    };
    let sweep = CrbSweepConfig {
        scatterer: p.scatterer,
        a0_finite: p.scatterer.a0,
        pulse: p.pulse,
        detector: cfg.detector.kind,
        solid_angle: cfg.detector.solid_angle_over_pi * PI,
        refinement: cfg.detector.refinement,
        distance_min: lo,
        distance_max: hi,
        points_per_decade: cfg.run.points_per_decade,
    };
    let r = crb_distance_sweep(&sweep)?;
    let table = Table::from(&r);
    let axis = r.axis.name.clone();
    let mut plot = PlotSpec::new("Normalized CRB against detector distance", &axis, "normalized bound").log(true, true);
    for tag in ["fwd", "bwd", "finite"] {
        for t in TAGS {
            plot.add(
                &table,
                Some(&axis),
                &format!("crb_{t}_norm_{tag}"),
                if tag == "bwd" { "lines dashtype 2" } else { "lines" },
            );
        }
    }
    for t in TAGS {
        plot.add(&table, Some(&axis), &format!("qcrb_{t}_norm"), "lines dashtype 3");
    }
    let mut summary = String::new();
    let last = r.len() - 1;
    let _ = writeln!(summary, "{} points, {} = {:.6} .. {:.6}", r.len(), axis, r.axis.values[0], r.axis.values[last]);
    for t in TAGS {
        let c = r.column(&format!("crb_{t}_norm_fwd")).map(|c| &c.values);
        if let Some(v) = c {
            let _ = writeln!(summary, "crb_{t}_norm_fwd: first {:.6e}, last {:.6e}", v[0], v[last]);
        }
    }
    Ok(Report::from_sweep(&r, plot, summary))
}

fn qfi_time(cfg: &RunConfig) -> Result<Report, CliError> {
    let mut runs = Vec::new();
    for (label, l) in std::iter::once(("l1", cfg.pulse.lambda_nm)).chain(cfg.pulse.lambda2_nm.map(|l| ("l2", l))) {
        let p = physical(cfg, l)?;
        runs.push(QfiRun {
            label: label.into(),
            scatterer: p.scatterer,
            pulse: p.pulse,
            length_unit_nm: p.length_unit_nm,
        });
    }
    let sweep = QfiTimeConfig {
        runs: runs.clone(),
        gauges: cfg.run.gauges.clone(),
        corrections: cfg.run.corrections,
        grid: cfg.grid,
        t_min_over_tau: cfg.run.t_min_over_tau,
        t_max_over_tau: cfg.run.t_max_over_tau,
        samples_per_period: cfg.run.samples_per_period,
    };
    let r = qfi_time_sweep(&sweep)?;
    let table = Table::from(&r);
    let mut plot = PlotSpec::new("QFI over far-field QFI", "t_over_tau", "J / J_far").log(false, true);
    let mut summary = String::new();
    for run in &runs {
        for g in &cfg.run.gauges {
            let tag = format!(
                "{}_{}",
                serde_json::to_value(g).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                run.label
            );
            for e in ["J00", "J11", "J33"] {
                plot.add(&table, Some("t_over_tau"), &format!("{e}_norm_{tag}"), "lines");
                if let Some(v) = r.meta(&format!("peak_ratio_{e}_{tag}")) {
                    let at = r.meta(&format!("peak_t_over_tau_{e}_{tag}")).unwrap_or("?");
                    let _ = writeln!(summary, "peak {e}/{e}_far [{tag}] = {v} at t/tau = {at}");
                }
            }
        }
    }
    Ok(Report::from_sweep(&r, plot, summary))
}

fn size_scan(cfg: &RunConfig) -> Result<Report, CliError> {
    let p = physical(cfg, cfg.pulse.lambda_nm)?;
    let lambda = p.lambda();
    let sweep = SizeScalingConfig {
        scatterer: p.scatterer,
        pulse: p.pulse,
        a0_values: log_spaced(cfg.run.a0_min_over_lambda * lambda, cfg.run.a0_max_over_lambda * lambda, cfg.run.sizes),
        gauges: cfg.run.gauges.clone(),
        grid: cfg.grid,
        t_over_tau: 0.0,
        residual_threshold: FIT_RESIDUAL_THRESHOLD,
    };
    let r = size_scaling_sweep(&sweep)?;
    let table = Table::from(&r);
    let mut plot = PlotSpec::new("Peak QFI against scatterer size", "lambda_over_a0", "J / J_far").log(true, true);
    for c in &r.columns {
        if c.name.ends_with("_norm") {
            plot.add(&table, Some("lambda_over_a0"), &c.name, "linespoints");
        }
    }
    let mut summary = String::new();
    for f in &r.fits {
        let flag = if f.flagged { " (residual above threshold)" } else { "" };
        let _ = writeln!(summary, "exponent {} = {:.4}, residual {:.3e}{flag}", f.name, f.exponent, f.residual);
    }
    Ok(Report::from_sweep(&r, plot, summary))
}

fn farfield(cfg: &RunConfig) -> Result<Report, CliError> {
    let p = physical(cfg, cfg.pulse.lambda_nm)?;
    let b = farfield_normalized_bounds(p.pulse.k_in);
    let mut table = Table::default().num("lambda_nm", "nm", vec![cfg.pulse.lambda_nm]);
    let mut plot = PlotSpec::new("Far-field QCRB", "lambda_nm", "normalized bound");
    let labels = ["sqrt(Nsc)*dchi0/chi0", "sqrt(Nsc)*dx0/lambda", "sqrt(Nsc)*dy0/lambda", "sqrt(Nsc)*dz0/lambda"];
    let mut summary = String::new();
    for (i, t) in TAGS.iter().enumerate() {
        let name = format!("qcrb_{t}_norm");
        table = table.num(&name, "1", vec![b[i]]);
        let _ = writeln!(summary, "{:<22} = {:.4}  ({:.12})", labels[i], b[i], b[i]);
    }
    for t in TAGS {
        plot.add(&table, Some("lambda_nm"), &format!("qcrb_{t}_norm"), "points");
    }
    let metadata = vec![("code_version".into(), CODE_VERSION.into()), ("sweep".into(), "farfield".into())];
    Ok(Report { table, plot, metadata, fits: Value::Array(vec![]), summary, failed: false })
}

fn validate(cfg: &RunConfig) -> Result<Report, CliError> {
    let report = validate_suite(cfg.run.level);
    let c = &report.checks;
    let table = Table::default()
        .text("check", c.iter().map(|c| c.name.clone()).collect())
        .num("measured", "1", c.iter().map(|c| c.measured).collect())
        .num("tolerance", "1", c.iter().map(|c| c.tolerance).collect())
        .num("passed", "1", c.iter().map(|c| if c.passed { 1.0 } else { 0.0 }).collect());
    let mut plot = PlotSpec::new("Validation errors and tolerances", "check", "relative error").log(false, true);
    plot.add(&table, None, "measured", "points");
    plot.add(&table, None, "tolerance", "steps");
    let mut summary = String::new();
    for c in c {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(summary, "{verdict} {:<28} error {:.3e}  tolerance {:.1e}", c.name, c.measured, c.tolerance);
    }
    let level = serde_json::to_value(report.level).unwrap_or(Value::Null);
    let metadata = vec![
        ("code_version".into(), CODE_VERSION.into()),
        ("sweep".into(), "validate".into()),
        ("level".into(), level.as_str().unwrap_or("").to_string()),
    ];
    Ok(Report { table, plot, metadata, fits: Value::Array(vec![]), summary, failed: !report.passed() })
}

//! Output files: `data.csv`, `config.resolved.json` and a gnuplot `plot.script`.

use std::fs;
use std::path::Path;

use dipole_bounds::scenarios::SweepResult;
use serde_json::Value;

use crate::CliError;

pub const DATA_FILE: &str = "data.csv";
pub const CONFIG_FILE: &str = "config.resolved.json";
pub const PLOT_FILE: &str = "plot.script";

#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    Num(Vec<f64>),
    Text(Vec<String>),
}

impl Values {
    fn len(&self) -> usize {
        match self {
            Values::Num(v) => v.len(),
            Values::Text(v) => v.len(),
        }
    }

    fn cell(&self, i: usize) -> String {
        match self {
            Values::Num(v) => format_number(v[i]),
            Values::Text(v) => v[i].clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableColumn {
    pub name: String,
    pub unit: String,
    pub values: Values,
}

/// Column-major table; every column has the same length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<TableColumn>,
}

impl Table {
    pub fn num(mut self, name: &str, unit: &str, values: Vec<f64>) -> Self {
        self.columns.push(TableColumn { name: name.into(), unit: unit.into(), values: Values::Num(values) });
        self
    }

    pub fn text(mut self, name: &str, values: Vec<String>) -> Self {
        self.columns.push(TableColumn { name: name.into(), unit: "-".into(), values: Values::Text(values) });
        self
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.values.len())
    }

    /// 1-based CSV column index, as gnuplot counts.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name).map(|i| i + 1)
    }

    pub fn header(&self) -> Vec<String> {
        self.columns.iter().map(|c| header_cell(&c.name, &c.unit)).collect()
    }
}

impl From<&SweepResult> for Table {
    fn from(r: &SweepResult) -> Self {
        let mut t = Table::default().num(&r.axis.name, &r.axis.unit, r.axis.values.clone());
        for c in &r.columns {
            t = t.num(&c.name, &c.unit, c.values.clone());
        }
        t
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn header_cell(name: &str, unit: &str) -> String {
    format!("{name} ({unit})")
}

/// Splits `name (unit)` back into its parts.
pub fn parse_header_cell(cell: &str) -> (&str, &str) {
    match cell.rsplit_once(" (") {
        Some((n, u)) => (n, u.trim_end_matches(')')),
        None => (cell, ""),
    }
}

pub fn write_csv(path: &Path, table: &Table) -> Result<(), CliError> {
    let n = table.rows();
    if let Some(c) = table.columns.iter().find(|c| c.values.len() != n) {
        return Err(CliError::Io(format!("column `{}` has {} rows, expected {n}", c.name, c.values.len())));
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path).map_err(csv_err)?;
    w.write_record(table.header()).map_err(csv_err)?;
    for i in 0..n {
        w.write_record(table.columns.iter().map(|c| c.values.cell(i))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Reads a CSV written by [`write_csv`]: header cells and numeric rows.
/// Non-numeric cells read as NaN.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        rows.push(rec.iter().map(|s| s.parse().unwrap_or(f64::NAN)).collect());
    }
    Ok((header, rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    /// 1-based column, or 0 for the row number.
    pub x: usize,
    pub y: usize,
    pub title: String,
    pub style: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSpec {
    pub title: String,
    pub xlabel: String,
    pub ylabel: String,
    pub logx: bool,
    pub logy: bool,
    pub series: Vec<Series>,
}

impl PlotSpec {
    pub fn new(title: &str, xlabel: &str, ylabel: &str) -> Self {
        Self {
            title: title.into(),
            xlabel: xlabel.into(),
            ylabel: ylabel.into(),
            logx: false,
            logy: false,
            series: Vec::new(),
        }
    }

    pub fn log(mut self, x: bool, y: bool) -> Self {
        self.logx = x;
        self.logy = y;
        self
    }

    /// Adds `y` against `x` when both columns exist in `table`; `x = None` plots
    /// against the row number.
    pub fn add(&mut self, table: &Table, x: Option<&str>, y: &str, style: &'static str) {
        let xi = match x {
            Some(name) => table.index_of(name),
            None => Some(0),
        };
        if let (Some(x), Some(yi)) = (xi, table.index_of(y)) {
            self.series.push(Series { x, y: yi, title: y.into(), style });
        }
    }
}

pub fn plot_script(spec: &PlotSpec) -> String {
    let mut s = String::new();
    s.push_str("# gnuplot ");
    s.push_str(PLOT_FILE);
    s.push('\n');
    s.push_str("set datafile separator ','\n");
    s.push_str("set terminal pngcairo size 1000,700 noenhanced\n");
    s.push_str("set output 'plot.png'\n");
    s.push_str(&format!("set title '{}'\n", spec.title));
    s.push_str(&format!("set xlabel '{}'\n", spec.xlabel));
    s.push_str(&format!("set ylabel '{}'\n", spec.ylabel));
    match (spec.logx, spec.logy) {
        (true, true) => s.push_str("set logscale xy\n"),
        (true, false) => s.push_str("set logscale x\n"),
        (false, true) => s.push_str("set logscale y\n"),
        _ => {}
    }
    s.push_str("set key outside right\n");
    let lines: Vec<String> = spec
        .series
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let file = if i == 0 { format!("'{DATA_FILE}'") } else { "''".into() };
            format!("{file} skip 1 using {}:{} with {} title '{}'", p.x, p.y, p.style, p.title)
        })
        .collect();
    if lines.is_empty() {
        s.push_str("# nothing to plot\n");
    } else {
        s.push_str("plot ");
        s.push_str(&lines.join(", \\\n     "));
        s.push('\n');
    }
    s
}

/// `(x, y, title)` for every `using x:y ... title '...'` clause of a script.
pub fn script_columns(script: &str) -> Vec<(usize, usize, String)> {
    let mut out = Vec::new();
    for part in script.split("using ").skip(1) {
        let spec = part.split_whitespace().next().unwrap_or("");
        let Some((x, y)) = spec.split_once(':') else { continue };
        let title = part.split("title '").nth(1).and_then(|t| t.split('\'').next()).unwrap_or("");
        if let (Ok(x), Ok(y)) = (x.parse(), y.parse()) {
            out.push((x, y, title.to_string()));
        }
    }
    out
}

/// Writes the three output files into `dir`, creating it when needed.
pub fn emit(dir: &Path, table: &Table, plot: &PlotSpec, resolved: &Value) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    write_csv(&dir.join(DATA_FILE), table)?;
    let mut json = serde_json::to_string_pretty(resolved).map_err(|e| CliError::Io(e.to_string()))?;
    json.push('\n');
    fs::write(dir.join(CONFIG_FILE), json)?;
    fs::write(dir.join(PLOT_FILE), plot_script(plot))?;
    Ok(())
}

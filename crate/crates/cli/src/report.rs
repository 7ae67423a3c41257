//! Run and refinement reports, their text summaries and CSV artifacts.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use jetmech::numeric::ConvergenceRatio;

use crate::scenario::{Diagnostic, Kind, Order};

/// Residuals at or below this fraction of their tolerance are treated as converged to
/// roundoff; refinement ratios between two such levels are reported "at floor".
pub const FLOOR_FRACTION: f64 = 1e-3;

/// A CSV artifact: `<name>.csv` with one header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticSummary {
    pub diagnostic: Diagnostic,
    pub maxnorm: f64,
    /// Grid `L²` norm of the residual field, for diagnostics that have one.
    pub l2: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
    /// Against the previous level, when the run is part of a refinement.
    pub ratio: Option<ConvergenceRatio>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub kind: Kind,
    /// Time step or largest grid spacing.
    pub resolution: f64,
    /// One entry per requested diagnostic, in request order.
    pub diagnostics: Vec<DiagnosticSummary>,
}

fn sci(x: f64) -> String {
    format!("{x:.3e}")
}

fn ratio_text(r: Option<ConvergenceRatio>) -> String {
    match r {
        None => "-".into(),
        Some(ConvergenceRatio::AtFloor) => "at floor".into(),
        Some(ConvergenceRatio::Measured(x)) => format!("{x:.2}"),
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.diagnostics.iter().all(|d| d.passed)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario `{}` ({}), resolution {}", self.scenario, self.kind, self.resolution);
        let _ = writeln!(out, "  {:<20}{:<12}{:<12}{:<12}status", "diagnostic", "maxnorm", "l2", "tolerance");
        for d in &self.diagnostics {
            let l2 = d.l2.map_or_else(|| "-".into(), sci);
            let _ = writeln!(
                out,
                "  {:<20}{:<12}{:<12}{:<12}{}",
                d.diagnostic.name(),
                sci(d.maxnorm),
                l2,
                sci(d.tolerance),
                verdict(d.passed)
            );
            if !d.detail.is_empty() {
                let _ = writeln!(out, "      {}", d.detail);
            }
        }
        let _ = writeln!(out, "result: {}", verdict(self.passed()));
        out
    }

    pub fn table(&self) -> Vec<Vec<String>> {
        let mut rows = vec![["diagnostic", "maxnorm", "l2", "tolerance", "status"].map(String::from).to_vec()];
        for d in &self.diagnostics {
            rows.push(vec![
                d.diagnostic.name().into(),
                d.maxnorm.to_string(),
                d.l2.map_or_else(String::new, |x| x.to_string()),
                d.tolerance.to_string(),
                verdict(d.passed).into(),
            ]);
        }
        rows
    }
}

/// Observed refinement ratios of one diagnostic against its expected order.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderCheck {
    pub diagnostic: Diagnostic,
    pub order: Order,
    pub floor: f64,
    pub ratios: Vec<ConvergenceRatio>,
    pub passed: bool,
}

impl OrderCheck {
    pub fn new(diagnostic: Diagnostic, floor: f64, ratios: Vec<ConvergenceRatio>) -> Self {
        let order = diagnostic.order();
        let ok = |r: &ConvergenceRatio| match (order, r) {
            (_, ConvergenceRatio::AtFloor) | (Order::Exact, _) => true,
            (Order::Second, ConvergenceRatio::Measured(x)) => (3.2..=4.8).contains(x),
            (Order::Fourth, ConvergenceRatio::Measured(x)) => *x >= 12.8,
        };
        let passed = ratios.iter().all(ok);
        Self { diagnostic, order, floor, ratios, passed }
    }

    fn expectation(&self) -> &'static str {
        match self.order {
            Order::Second => "second order, ratio in [3.2, 4.8]",
            Order::Fourth => "at least fourth order, ratio >= 12.8",
            Order::Exact => "exact up to roundoff, not judged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineReport {
    pub scenario: String,
    pub levels: Vec<RunReport>,
    pub checks: Vec<OrderCheck>,
}

impl RefineReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario `{}`: refinement over {} levels", self.scenario, self.levels.len());
        let _ = writeln!(out, "  {:<20}{:<7}{:<12}{:<12}ratio", "diagnostic", "level", "resolution", "maxnorm");
        for (i, check) in self.checks.iter().enumerate() {
            for (level, report) in self.levels.iter().enumerate() {
                let d = &report.diagnostics[i];
                let _ = writeln!(
                    out,
                    "  {:<20}{:<7}{:<12}{:<12}{}",
                    check.diagnostic.name(),
                    level,
                    report.resolution,
                    sci(d.maxnorm),
                    ratio_text(d.ratio)
                );
            }
        }
        for c in &self.checks {
            let _ = writeln!(out, "  {}: {}, floor {}: {}", c.diagnostic, c.expectation(), sci(c.floor), verdict(c.passed));
        }
        let _ = writeln!(out, "result: {}", verdict(self.passed()));
        out
    }

    pub fn table(&self) -> Vec<Vec<String>> {
        let mut rows = vec![["diagnostic", "level", "resolution", "maxnorm", "l2", "ratio"].map(String::from).to_vec()];
        for (i, check) in self.checks.iter().enumerate() {
            for (level, report) in self.levels.iter().enumerate() {
                let d = &report.diagnostics[i];
                let ratio = match d.ratio {
                    None => String::new(),
                    Some(ConvergenceRatio::AtFloor) => "at_floor".into(),
                    Some(ConvergenceRatio::Measured(x)) => x.to_string(),
                };
                rows.push(vec![
                    check.diagnostic.name().into(),
                    level.to_string(),
                    report.resolution.to_string(),
                    d.maxnorm.to_string(),
                    d.l2.map_or_else(String::new, |x| x.to_string()),
                    ratio,
                ]);
            }
        }
        rows
    }
}

fn write_rows(path: &Path, rows: &[Vec<String>]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()
}

/// Writes every table plus `report.csv`. Floats use the shortest representation that
/// round-trips, so identical runs give identical bytes.
pub fn write_run(dir: &Path, report: &RunReport, tables: &[Table]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for t in tables {
        let mut rows = vec![t.header.clone()];
        rows.extend(t.rows.iter().map(|r| r.iter().map(f64::to_string).collect()));
        write_rows(&dir.join(format!("{}.csv", t.name)), &rows)?;
    }
    write_rows(&dir.join("report.csv"), &report.table())
}

/// Writes `convergence.csv`.
pub fn write_refine(dir: &Path, report: &RefineReport) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    write_rows(&dir.join("convergence.csv"), &report.table())
}

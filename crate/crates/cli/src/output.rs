//! CSV files with a leading manifest comment, and the manifest itself.

use std::fs;
use std::io::Write;
use std::path::Path;

use penproj::experiments::{ErrorReport, Exceedance, RateFit, StabilityLevel, TaylorGreenLevel};
use penproj::schemes::{DecompositionStep, StepDiagnostics};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// One CSV row type with a fixed column set.
pub trait CsvRecord {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

/// Writes `# manifest: <hash>`, the header and one row per record.
pub fn write_csv<R: CsvRecord>(records: &[R], path: &Path, manifest_hash: &str) -> CliResult<()> {
    let mut buf = format!("# manifest: {manifest_hash}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let fail = |e: csv::Error| CliError::io(path, std::io::Error::other(e));
        w.write_record(R::HEADER).map_err(fail)?;
        for r in records {
            w.write_record(r.fields()).map_err(fail)?;
        }
        w.flush().map_err(|e| CliError::io(path, e))?;
    }
    fs::write(path, buf).map_err(|e| CliError::io(path, e))
}

/// Reads a file written by [`write_csv`]: header and rows as strings.
pub fn read_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::io(path, std::io::Error::other(e)))?;
    let fail = |e: csv::Error| CliError::io(path, std::io::Error::other(e));
    let header = r
        .headers()
        .map_err(fail)?
        .iter()
        .map(String::from)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(fail)?.iter().map(String::from).collect());
    }
    Ok((header, rows))
}

/// Writes `manifest.txt`: hash, tool version, subcommand and the canonical config.
pub fn write_manifest(cfg: &RunConfig, subcommand: &str, dir: &Path) -> CliResult<()> {
    let path = dir.join("manifest.txt");
    let mut f = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    write!(
        f,
        "# manifest: {}\n# version: {}\n# subcommand: {subcommand}\n{}",
        cfg.manifest_hash(),
        env!("CARGO_PKG_VERSION"),
        cfg.canonical()
    )
    .map_err(|e| CliError::io(&path, e))
}

impl CsvRecord for StepDiagnostics {
    const HEADER: &'static [&'static str] = &[
        "step",
        "t",
        "energy",
        "enstrophy",
        "div_residual",
        "penalty_residual",
        "picard_iters",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            self.step.to_string(),
            float(self.t),
            float(self.energy),
            float(self.enstrophy),
            float(self.div_residual),
            float(self.penalty_residual),
            self.picard_iters.to_string(),
        ]
    }
}

/// One line of `errors.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRow {
    pub path: u64,
    pub level: usize,
    pub k: f64,
    pub eps: f64,
    pub em: f64,
    pub tem: f64,
    pub max_term: f64,
    pub grad_term: f64,
    pub pressure_term: f64,
    pub blew_up: bool,
}

/// Rows of all reports, ordered by level and then path.
pub fn error_rows(reports: &[ErrorReport]) -> Vec<ErrorRow> {
    reports
        .iter()
        .flat_map(|r| {
            r.paths.iter().map(move |p| {
                let t = p.terms;
                let pick = |f: fn(&penproj::experiments::ErrorTerms) -> f64| {
                    t.as_ref().map_or(f64::NAN, f)
                };
                ErrorRow {
                    path: p.path,
                    level: r.level.level,
                    k: r.level.k,
                    eps: r.level.eps,
                    em: pick(|t| t.em()),
                    tem: pick(|t| t.tem()),
                    max_term: pick(|t| t.max_term),
                    grad_term: pick(|t| t.grad_term),
                    pressure_term: pick(|t| t.pressure_term),
                    blew_up: p.blew_up,
                }
            })
        })
        .collect()
}

impl CsvRecord for ErrorRow {
    const HEADER: &'static [&'static str] = &[
        "path",
        "level",
        "k",
        "eps",
        "EM",
        "tEM",
        "EM_max_term",
        "EM_grad_term",
        "EM_pressure_term",
        "blew_up",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            self.path.to_string(),
            self.level.to_string(),
            float(self.k),
            float(self.eps),
            float(self.em),
            float(self.tem),
            float(self.max_term),
            float(self.grad_term),
            float(self.pressure_term),
            self.blew_up.to_string(),
        ]
    }
}

/// One line of `rates.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateRow {
    pub response: String,
    pub fit: RateFit,
}

impl CsvRecord for RateRow {
    const HEADER: &'static [&'static str] = &["response", "slope", "intercept", "residual"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.response.clone(),
            float(self.fit.slope),
            float(self.fit.intercept),
            float(self.fit.residual),
        ]
    }
}

impl CsvRecord for Exceedance {
    const HEADER: &'static [&'static str] = &["level", "k", "C", "r", "fraction", "ci_half_width"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.level.to_string(),
            float(self.k),
            float(self.c),
            float(self.r),
            float(self.fraction),
            float(self.ci_half_width),
        ]
    }
}

impl CsvRecord for StabilityLevel {
    const HEADER: &'static [&'static str] = &[
        "level",
        "k",
        "eps",
        "max_energy",
        "grad_sum",
        "pressure_sum",
        "finite_paths",
        "failed_paths",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            self.level.level.to_string(),
            float(self.level.k),
            float(self.level.eps),
            float(self.mean.max_energy),
            float(self.mean.grad_sum),
            float(self.mean.pressure_sum),
            self.finite_paths.to_string(),
            self.failed_paths.to_string(),
        ]
    }
}

impl CsvRecord for TaylorGreenLevel {
    const HEADER: &'static [&'static str] = &["steps", "k", "max_error"];
    fn fields(&self) -> Vec<String> {
        vec![self.steps.to_string(), float(self.k), float(self.max_error)]
    }
}

impl CsvRecord for DecompositionStep {
    const HEADER: &'static [&'static str] = &[
        "step",
        "velocity_residual",
        "scale",
        "pressure_residual",
        "pressure_scale",
        "phi_residual",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            self.step.to_string(),
            float(self.velocity_residual),
            float(self.scale),
            float(self.pressure_residual),
            float(self.pressure_scale),
            float(self.phi_residual),
        ]
    }
}

/// Summary row of the sample-set diagnostics at one level.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSetRow {
    pub level: usize,
    pub k: f64,
    pub kappa: [f64; 3],
    pub complement: [f64; 3],
    pub intersection: f64,
}

impl CsvRecord for SampleSetRow {
    const HEADER: &'static [&'static str] = &[
        "level", "k", "kappa1", "kappa2", "kappa3", "p_out1", "p_out2", "p_out3", "p_all",
    ];
    fn fields(&self) -> Vec<String> {
        let mut v = vec![self.level.to_string(), float(self.k)];
        v.extend(self.kappa.iter().map(|&x| float(x)));
        v.extend(self.complement.iter().map(|&x| float(x)));
        v.push(float(self.intersection));
        v
    }
}

/// Key/value summary lines.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRow {
    pub check: String,
    pub value: f64,
    pub passed: bool,
}

impl CsvRecord for CheckRow {
    const HEADER: &'static [&'static str] = &["check", "value", "passed"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.check.clone(),
            float(self.value),
            self.passed.to_string(),
        ]
    }
}

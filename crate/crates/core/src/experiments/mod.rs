//! Seeded experiments. Each one writes CSV tables plus a JSON manifest
//! (parameters, `git describe`, wall time, summary) into an output directory.

mod amplification;
pub mod config;
mod gaussian;
mod ring;
mod schedule_report;
mod sensing;
pub mod setup;
mod variance;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::str::FromStr;
use std::time::Instant;

use serde_json::{json, Value};

pub use amplification::{amplification, AmplificationParams, AmplificationResult};
pub use config::Config;
pub use gaussian::{gaussian_posterior, GaussianPosteriorParams, GaussianPosteriorResult, RungCheck};
pub use ring::{
    ring_fd_hessian, ring_hessian_grid, ring_log_density_quadrature, ring_posterior, ring_posterior_rejection_sample,
    RingHessianParams, RingHessianRow, RingPosteriorParams, RingPosteriorResult,
};
pub use schedule_report::{
    fuzz_case_report, schedule_report, sequence_grid, CaseReport, FuzzCase, ScheduleReportParams,
    ScheduleReportResult, SequenceRow,
};
pub use sensing::{compressed_sensing_trials, gaussian_norm_quantile, SensingParams, SensingResult};
pub use variance::{variance_curve_experiment, VarianceCurveParams, VarianceCurveResult};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentName {
    VarianceCurve,
    GaussianPosterior,
    RungStability,
    Ring,
    Amplification,
    CompressedSensing,
    ScheduleReport,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 7] = [
        ExperimentName::VarianceCurve,
        ExperimentName::GaussianPosterior,
        ExperimentName::RungStability,
        ExperimentName::Ring,
        ExperimentName::Amplification,
        ExperimentName::CompressedSensing,
        ExperimentName::ScheduleReport,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::VarianceCurve => "variance-curve",
            ExperimentName::GaussianPosterior => "gaussian-posterior",
            ExperimentName::RungStability => "rung-stability",
            ExperimentName::Ring => "ring",
            ExperimentName::Amplification => "amplification",
            ExperimentName::CompressedSensing => "compressed-sensing",
            ExperimentName::ScheduleReport => "schedule-report",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown experiment `{s}`")))
    }
}

/// A CSV table kept as text cells so output is byte-stable.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::invalid(format!("csv: {e}"));
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::invalid(format!("csv: {e}")))
    }
}

/// Shortest round-trip decimal form.
pub fn cell(v: f64) -> String {
    format!("{v}")
}

pub struct ExperimentOutput {
    pub tables: Vec<(String, Table)>,
    pub summary: Value,
}

#[derive(Debug)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    pub config: Config,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub manifest: PathBuf,
    pub tables: Vec<PathBuf>,
    pub summary: Value,
}

pub fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".to_string())
}

fn execute(name: ExperimentName, config: &mut Config, seed: u64) -> Result<ExperimentOutput> {
    let out = match name {
        ExperimentName::VarianceCurve => {
            let p = VarianceCurveParams::from_config(config)?;
            config.finish()?;
            variance_curve_experiment(&p, seed)?.output()
        }
        ExperimentName::GaussianPosterior | ExperimentName::RungStability => {
            let mut p = GaussianPosteriorParams::from_config(config)?;
            config.finish()?;
            p.snapshots = name == ExperimentName::RungStability;
            let r = gaussian_posterior(&p, seed)?;
            if name == ExperimentName::RungStability {
                r.rung_output()
            } else {
                r.final_output()
            }
        }
        ExperimentName::Ring => {
            let h = RingHessianParams::from_config(config)?;
            let p = RingPosteriorParams::from_config(config)?;
            config.finish()?;
            ring::ring_output(&h, &p, seed)?
        }
        ExperimentName::Amplification => {
            let p = AmplificationParams::from_config(config)?;
            config.finish()?;
            amplification(&p, seed)?.output()
        }
        ExperimentName::CompressedSensing => {
            let p = SensingParams::from_config(config)?;
            config.finish()?;
            compressed_sensing_trials(&p, seed)?.output()
        }
        ExperimentName::ScheduleReport => {
            let p = ScheduleReportParams::from_config(config)?;
            config.finish()?;
            schedule_report(&p, seed)?.output()
        }
    };
    Ok(out)
}

/// Runs one experiment and writes `<name>*.csv` and `<name>.json` into `spec.out`.
pub fn run_experiment(mut spec: ExperimentSpec) -> Result<ExperimentReport> {
    let started = Instant::now();
    let name = spec.name;
    let wrap = |e: Error| Error::InExperiment {
        name: name.to_string(),
        source: Box::new(e),
    };
    let output = execute(name, &mut spec.config, spec.seed).map_err(wrap)?;
    write_outputs(&spec.out, name.as_str(), spec.seed, spec.config.resolved(), output, started).map_err(wrap)
}

pub(crate) fn write_outputs(
    dir: &Path,
    stem: &str,
    seed: u64,
    parameters: Value,
    output: ExperimentOutput,
    started: Instant,
) -> Result<ExperimentReport> {
    std::fs::create_dir_all(dir)?;
    let mut tables = Vec::new();
    for (file, table) in &output.tables {
        let path = dir.join(file);
        std::fs::write(&path, table.to_csv()?)?;
        tables.push(path);
    }
    let manifest = json!({
        "experiment": stem,
        "seed": seed,
        "parameters": parameters,
        "git_describe": git_describe(),
        "wall_time_s": started.elapsed().as_secs_f64(),
        "outputs": output.tables.iter().map(|(f, _)| f.clone()).collect::<Vec<_>>(),
        "summary": output.summary,
    });
    let path = dir.join(format!("{stem}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(ExperimentReport {
        manifest: path,
        tables,
        summary: output.summary,
    })
}

/// Mean, variance (divisor `n`) and standard error of the variance.
pub(crate) fn variance_with_stderr(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m4) = (0.0, 0.0);
    for v in values {
        let d = v - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m4 /= n;
    (mean, m2, ((m4 - m2 * m2) / n).max(0.0).sqrt())
}

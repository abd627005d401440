//! Admissible-schedule fuzzing: clause checks, monotonicity of the rung count,
//! and the scalar growth-sequence bound.

use rand::Rng;
use serde_json::json;

use super::setup::random_operator;
use super::{cell, Config, ExperimentOutput, Table};
use crate::error::{Error, Result};
use crate::measurement::MeasurementModel;
use crate::rng::{ChainRng, Purpose, SeedStream};
use crate::schedule::{
    build_admissible_schedule, quadratic_sequence_bound, quadratic_sequence_steps, rung_count_bound,
    validate_schedule, ScheduleParams,
};

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleReportParams {
    pub cases: usize,
}

impl Default for ScheduleReportParams {
    fn default() -> Self {
        Self { cases: 200 }
    }
}

impl ScheduleReportParams {
    pub fn from_config(c: &mut Config) -> Result<Self> {
        Ok(Self {
            cases: c.usize("cases", Self::default().cases)?,
        })
    }
}

/// One fuzzed problem.
#[derive(Clone, Debug)]
pub struct FuzzCase {
    pub params: ScheduleParams,
    pub op_norm: f64,
    pub eta: f64,
}

impl FuzzCase {
    pub fn draw(rng: &mut ChainRng) -> Self {
        let d = rng.random_range(1..=20usize);
        let m = rng.random_range(1..=d);
        let params = ScheduleParams::new(rng.random_range(0.2..5.0), d, m, rng.random_range(0.1..5.0))
            .with_lambda(rng.random_range(2.0..50.0))
            .with_eps(rng.random_range(0.01..0.5))
            .with_c(rng.random_range(1.0..10.0));
        Self {
            params,
            op_norm: rng.random_range(0.1..2.0),
            eta: rng.random_range(0.2..2.0),
        }
    }

    pub fn model(&self, m: usize, rng: &mut ChainRng) -> Result<MeasurementModel> {
        MeasurementModel::new(random_operator(m, self.params.d, self.op_norm, rng)?, self.eta)
    }
}

#[derive(Clone, Debug)]
pub struct CaseReport {
    pub case: FuzzCase,
    pub rungs: usize,
    pub bound: f64,
    pub admissible: bool,
    pub worst_slack: f64,
    /// Rung counts after `eps * 1.5`, `lambda * 1.5`, `m + 1`, `R * 1.5`.
    pub perturbed: [usize; 4],
}

impl CaseReport {
    /// Larger `eps` never adds rungs; larger `lambda`, `m`, `R` never remove any.
    pub fn monotone(&self) -> bool {
        let [e, l, m, r] = self.perturbed;
        e <= self.rungs && l >= self.rungs && m >= self.rungs && r >= self.rungs
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceRow {
    pub a: f64,
    pub b: f64,
    pub x0: f64,
    pub big_b: f64,
    pub steps: usize,
    pub bound: f64,
}

pub struct ScheduleReportResult {
    pub cases: Vec<CaseReport>,
    pub sequences: Vec<SequenceRow>,
}

impl ScheduleReportResult {
    pub fn inadmissible(&self) -> usize {
        self.cases.iter().filter(|c| !c.admissible).count()
    }

    pub fn non_monotone(&self) -> usize {
        self.cases.iter().filter(|c| !c.monotone()).count()
    }

    /// Smallest `K` with `steps <= K * bound` across the sequence grid.
    pub fn sequence_constant(&self) -> f64 {
        self.sequences.iter().map(|s| s.steps as f64 / s.bound).fold(0.0, f64::max)
    }

    pub fn output(&self) -> ExperimentOutput {
        let mut t = Table::new(&[
            "case", "alpha", "d", "m", "op_norm", "eta", "lambda", "eps", "radius", "c", "rungs", "bound",
            "admissible", "worst_slack", "n_eps", "n_lambda", "n_m", "n_radius",
        ]);
        for (i, r) in self.cases.iter().enumerate() {
            let p = &r.case.params;
            let mut row = vec![
                i.to_string(),
                cell(p.alpha),
                p.d.to_string(),
                p.m.to_string(),
                cell(r.case.op_norm),
                cell(r.case.eta),
                cell(p.lambda),
                cell(p.eps),
                cell(p.radius),
                cell(p.c),
                r.rungs.to_string(),
                cell(r.bound),
                r.admissible.to_string(),
                cell(r.worst_slack),
            ];
            row.extend(r.perturbed.iter().map(|n| n.to_string()));
            t.push(row);
        }
        let mut s = Table::new(&["a", "b", "x0", "B", "steps", "bound", "ratio"]);
        for r in &self.sequences {
            s.push(vec![
                cell(r.a),
                cell(r.b),
                cell(r.x0),
                cell(r.big_b),
                r.steps.to_string(),
                cell(r.bound),
                cell(r.steps as f64 / r.bound),
            ]);
        }
        ExperimentOutput {
            tables: vec![("schedule-report.csv".into(), t), ("schedule-report_sequence.csv".into(), s)],
            summary: json!({
                "cases": self.cases.len(),
                "inadmissible": self.inadmissible(),
                "non_monotone": self.non_monotone(),
                "sequence_constant": self.sequence_constant(),
            }),
        }
    }
}

fn rung_count(model: &MeasurementModel, params: &ScheduleParams) -> Result<usize> {
    Ok(build_admissible_schedule(model, params)?.len())
}

pub fn fuzz_case_report(case: FuzzCase, rng: &mut ChainRng) -> Result<CaseReport> {
    let p = &case.params;
    let model = case.model(p.m, rng)?;
    let ladder = build_admissible_schedule(&model, p)?;
    let report = validate_schedule(&ladder);
    let worst_slack = report.clauses.iter().map(|c| c.slack).fold(f64::INFINITY, f64::min);
    let wider = case.model(p.m + 1, rng)?;
    let mut more_m = p.clone();
    more_m.m += 1;
    let perturbed = [
        rung_count(&model, &p.clone().with_eps((p.eps * 1.5).min(0.99)))?,
        rung_count(&model, &p.clone().with_lambda(p.lambda * 1.5))?,
        rung_count(&wider, &more_m)?,
        rung_count(&model, &ScheduleParams { radius: p.radius * 1.5, ..p.clone() })?,
    ];
    Ok(CaseReport {
        rungs: ladder.len(),
        bound: rung_count_bound(p, &model),
        admissible: report.passes(),
        worst_slack,
        perturbed,
        case,
    })
}

pub fn sequence_grid() -> Vec<SequenceRow> {
    let mut rows = Vec::new();
    for &a in &[0.1, 1.0, 10.0, 100.0] {
        for &b in &[0.1, 1.0, 10.0] {
            for &x0 in &[0.01, 0.1, 1.0] {
                for &big_b in &[10.0, 1e3, 1e6] {
                    rows.push(SequenceRow {
                        a,
                        b,
                        x0,
                        big_b,
                        steps: quadratic_sequence_steps(a, b, x0, big_b),
                        bound: quadratic_sequence_bound(a, b, x0, big_b),
                    });
                }
            }
        }
    }
    rows
}

pub fn schedule_report(p: &ScheduleReportParams, seed: u64) -> Result<ScheduleReportResult> {
    if p.cases == 0 {
        return Err(Error::invalid("need at least one case"));
    }
    let seeds = SeedStream::new(seed);
    let cases = (0..p.cases as u64)
        .map(|i| {
            let mut rng = seeds.rng(Purpose::Experiment, i);
            let case = FuzzCase::draw(&mut rng);
            fuzz_case_report(case, &mut rng)
        })
        .collect::<Result<_>>()?;
    Ok(ScheduleReportResult {
        cases,
        sequences: sequence_grid(),
    })
}

//! Admissible noise schedules `eta_1 > ... > eta_N = eta` with mixing times.
//!
//! A schedule is admissible for `(C, alpha, lambda, A, d, eps, eta, R)` when
//!
//! 1. `eta_N = eta`,
//! 2. `eta_1 >= (lambda |A| / eps) sqrt(d / alpha)`,
//! 3. every `gamma_i = (eta_i / eta_{i+1})^2 - 1` satisfies `gamma_i <= 1`,
//!    `T_i >= C (m gamma_i + ln(lambda / eps)) / alpha` and
//!    `|A|^4 (T_i^2 m + T_i R^2) <= eta_i^4 / (C gamma_i^2)`.
//!
//! The constructor grows the noise level upward from `eta`, taking the largest
//! admissible `gamma` at every rung, and sets each `T_i` to its lower bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measurement::MeasurementModel;

/// How the constructor picks the step `gamma` at each rung.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum GammaRule {
    /// Largest `gamma <= 1` meeting the cross constraint itself (polynomial
    /// root). Monotone in every parameter.
    #[default]
    Exact,
    /// Closed-form root of the quadratic sufficient condition
    /// (see [`max_admissible_gamma`]). Sufficient only for `C >= 1`.
    Quadratic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    /// Strong log-concavity of the (conditioned) prior.
    pub alpha: f64,
    pub d: usize,
    pub m: usize,
    pub lambda: f64,
    pub eps: f64,
    /// Locality radius `R`; `f64::INFINITY` is accepted but admits no schedule
    /// unless `|A| = 0`.
    pub radius: f64,
    pub c: f64,
    pub gamma_rule: GammaRule,
    pub max_rungs: usize,
}

pub const DEFAULT_C: f64 = 10.0;
pub const DEFAULT_LAMBDA: f64 = 10.0;
pub const DEFAULT_EPS: f64 = 0.1;
pub const DEFAULT_MAX_RUNGS: usize = 1_000_000;

impl ScheduleParams {
    pub fn new(alpha: f64, d: usize, m: usize, radius: f64) -> Self {
        Self {
            alpha,
            d,
            m,
            lambda: DEFAULT_LAMBDA,
            eps: DEFAULT_EPS,
            radius,
            c: DEFAULT_C,
            gamma_rule: GammaRule::default(),
            max_rungs: DEFAULT_MAX_RUNGS,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_gamma_rule(mut self, rule: GammaRule) -> Self {
        self.gamma_rule = rule;
        self
    }

    pub fn with_max_rungs(mut self, max_rungs: usize) -> Self {
        self.max_rungs = max_rungs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && !v.is_nan();
        if !(positive(self.alpha) && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.d == 0 || self.m == 0 {
            return Err(Error::invalid("d and m must be positive"));
        }
        if !(self.lambda > 1.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must exceed 1, got {}", self.lambda)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::invalid(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        if !positive(self.radius) {
            return Err(Error::invalid(format!("radius must be positive, got {}", self.radius)));
        }
        if !(positive(self.c) && self.c.is_finite()) {
            return Err(Error::invalid(format!("C must be positive, got {}", self.c)));
        }
        if self.max_rungs == 0 {
            return Err(Error::invalid("max_rungs must be positive"));
        }
        Ok(())
    }

    pub fn log_ratio(&self) -> f64 {
        (self.lambda / self.eps).ln()
    }

    fn check_model(&self, model: &MeasurementModel) -> Result<()> {
        if model.rows() != self.m || model.cols() != self.d {
            return Err(Error::invalid(format!(
                "schedule params (m = {}, d = {}) disagree with model ({} x {})",
                self.m,
                self.d,
                model.rows(),
                model.cols()
            )));
        }
        Ok(())
    }
}

/// `r = 2 sqrt(d / alpha) + sqrt(2 ln(1/delta) / alpha)`: the ball that holds
/// `1 - delta` of an alpha-strongly log-concave law around its mode.
pub fn concentration_radius(d: usize, alpha: f64, delta: f64) -> f64 {
    2.0 * (d as f64 / alpha).sqrt() + (2.0 * (1.0 / delta).ln() / alpha).sqrt()
}

/// Locality radius for globally log-concave priors:
/// `r + C ((m + L) |A| / (alpha eta^2) (|A| r + eta sqrt(m + ln(1/delta)))
///        + sqrt(d ln(d/delta) (m + L) / alpha))`
/// with `L = ln(lambda/eps)`, `r` from [`concentration_radius`] and
/// `delta = eps / k_surrogate^2`.
pub fn derived_radius(params: &ScheduleParams, model: &MeasurementModel, k_surrogate: f64) -> f64 {
    let delta = params.eps / (k_surrogate * k_surrogate);
    let r = concentration_radius(params.d, params.alpha, delta);
    let (m, d) = (params.m as f64, params.d as f64);
    let l = params.log_ratio();
    let a = model.op_norm();
    let eta = model.eta();
    let drift = (m + l) * a / (params.alpha * eta * eta) * (a * r + eta * (m + (1.0 / delta).ln()).sqrt());
    let spread = (d * (d / delta).ln() * (m + l) / params.alpha).sqrt();
    r + params.c * (drift + spread)
}

/// `(lambda |A| / eps) sqrt(d / alpha)`.
pub fn target_eta(params: &ScheduleParams, op_norm: f64) -> f64 {
    params.lambda * op_norm / params.eps * (params.d as f64 / params.alpha).sqrt()
}

/// Mixing time at its lower bound, `C (m gamma + ln(lambda/eps)) / alpha`.
pub fn running_time(gamma: f64, params: &ScheduleParams) -> f64 {
    params.c * (params.m as f64 * gamma + params.log_ratio()) / params.alpha
}

/// Coefficients `(a, b)` of the sufficient condition `a g^2 + b g <= eta^2 / C`.
pub fn quadratic_coefficients(params: &ScheduleParams, op_norm: f64) -> (f64, f64) {
    let a2 = op_norm * op_norm;
    let m = params.m as f64;
    let a = params.c * a2 * m.powf(1.5) / params.alpha;
    let b = params.c * a2 * m.sqrt() * params.log_ratio() / params.alpha
        + a2 * params.radius * params.radius / m.sqrt();
    (a, b)
}

fn positive_root(a: f64, b: f64, c: f64) -> f64 {
    // Larger root of a g^2 + b g - c = 0 in the cancellation-free form.
    if a == 0.0 {
        if b == 0.0 {
            f64::INFINITY
        } else {
            c / b
        }
    } else {
        2.0 * c / (b + (b * b + 4.0 * a * c).sqrt())
    }
}

/// Largest `gamma in (0, 1]` with `a gamma^2 + b gamma <= eta_sq / C`, where
/// `(a, b)` come from [`quadratic_coefficients`].
pub fn max_admissible_gamma(eta_sq: f64, params: &ScheduleParams, model: &MeasurementModel) -> Result<f64> {
    quadratic_gamma(eta_sq, params, model.op_norm())
}

fn quadratic_gamma(eta_sq: f64, params: &ScheduleParams, op_norm: f64) -> Result<f64> {
    if !(eta_sq > 0.0) {
        return Err(Error::invalid(format!("eta^2 must be positive, got {eta_sq}")));
    }
    let (a, b) = quadratic_coefficients(params, op_norm);
    let gamma = positive_root(a, b, eta_sq / params.c).min(1.0);
    if !(gamma > 0.0) || gamma.is_nan() {
        return Err(Error::NoAdmissibleGamma { eta_sq });
    }
    Ok(gamma)
}

/// `|A|^4 gamma^2 (T^2 m + T R^2) - eta^4 / C` with `T = T(gamma)`; feasible iff `<= 0`.
fn cross_excess(gamma: f64, eta_sq: f64, params: &ScheduleParams, op_norm: f64) -> f64 {
    let a4 = op_norm.powi(4);
    let t = running_time(gamma, params);
    let r2 = params.radius * params.radius;
    a4 * gamma * gamma * (t * t * params.m as f64 + t * r2) - eta_sq * eta_sq / params.c
}

/// Largest `gamma in (0, 1]` satisfying the cross constraint
/// `|A|^4 (T(gamma)^2 m + T(gamma) R^2) <= eta^4 / (C gamma^2)` exactly.
pub fn exact_admissible_gamma(eta_sq: f64, params: &ScheduleParams, op_norm: f64) -> Result<f64> {
    if !(eta_sq > 0.0) {
        return Err(Error::invalid(format!("eta^2 must be positive, got {eta_sq}")));
    }
    if op_norm == 0.0 {
        return Ok(1.0);
    }
    if !params.radius.is_finite() {
        return Err(Error::NoAdmissibleGamma { eta_sq });
    }
    let g = |x: f64| cross_excess(x, eta_sq, params, op_norm);
    if g(1.0) <= 0.0 {
        return Ok(1.0);
    }
    // g is a polynomial with non-negative coefficients minus a constant, so it
    // is increasing and convex on (0, inf): Newton from the right decreases
    // monotonically onto the root.
    let a4 = op_norm.powi(4);
    let m = params.m as f64;
    let r2 = params.radius * params.radius;
    let dt = params.c * m / params.alpha;
    let dg = |x: f64| {
        let t = running_time(x, params);
        a4 * (2.0 * x * (t * t * m + t * r2) + x * x * (2.0 * t * m + r2) * dt)
    };
    let mut gamma = 1.0_f64;
    for _ in 0..200 {
        let step = g(gamma) / dg(gamma);
        let next = gamma - step;
        if !(next > 0.0) {
            gamma *= 0.5;
            continue;
        }
        let done = (gamma - next).abs() <= 1e-15 * gamma;
        gamma = next;
        if done {
            break;
        }
    }
    let mut tries = 0;
    while g(gamma) > 0.0 && tries < 64 {
        gamma *= 1.0 - 1e-15 * (1u64 << tries.min(40)) as f64;
        tries += 1;
    }
    if !(gamma > 0.0) || g(gamma) > 0.0 {
        return Err(Error::NoAdmissibleGamma { eta_sq });
    }
    Ok(gamma)
}

fn next_gamma(eta_sq: f64, params: &ScheduleParams, op_norm: f64) -> Result<f64> {
    match params.gamma_rule {
        GammaRule::Exact => exact_admissible_gamma(eta_sq, params, op_norm),
        GammaRule::Quadratic => quadratic_gamma(eta_sq, params, op_norm),
    }
}

/// A noise ladder: `etas[0]` is the noisiest level, `etas[N-1]` the target.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoiseLadder {
    etas: Vec<f64>,
    gammas: Vec<f64>,
    times: Vec<f64>,
    params: ScheduleParams,
    op_norm: f64,
    eta: f64,
}

impl NoiseLadder {
    /// Wraps a hand-built ladder for validation. Levels must be non-increasing;
    /// admissibility is not checked here (see [`validate_schedule`]).
    pub fn new(etas: Vec<f64>, times: Vec<f64>, params: ScheduleParams, model: &MeasurementModel) -> Result<Self> {
        Self::from_parts(etas, times, params, model.op_norm(), model.eta())
    }

    pub(crate) fn from_parts(
        etas: Vec<f64>,
        times: Vec<f64>,
        params: ScheduleParams,
        op_norm: f64,
        eta: f64,
    ) -> Result<Self> {
        if etas.is_empty() {
            return Err(Error::invalid("noise ladder needs at least one level"));
        }
        if times.len() + 1 != etas.len() {
            return Err(Error::invalid(format!(
                "{} noise levels need {} running times, got {}",
                etas.len(),
                etas.len() - 1,
                times.len()
            )));
        }
        if etas.iter().any(|e| !(*e > 0.0 && e.is_finite())) || times.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::invalid("noise levels must be positive and times non-negative"));
        }
        if etas.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("noise levels must be non-increasing"));
        }
        let gammas = etas.windows(2).map(|w| (w[0] / w[1]).powi(2) - 1.0).collect();
        Ok(Self {
            etas,
            gammas,
            times,
            params,
            op_norm,
            eta,
        })
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn params(&self) -> &ScheduleParams {
        &self.params
    }

    pub fn op_norm(&self) -> f64 {
        self.op_norm
    }

    pub fn len(&self) -> usize {
        self.etas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.etas.is_empty()
    }

    pub fn total_time(&self) -> f64 {
        self.times.iter().sum()
    }

    /// CSV with columns `index,eta,gamma,T,cumulative_T`; the last rung has
    /// empty gamma and T.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,eta,gamma,T,cumulative_T\n");
        let mut cumulative = 0.0;
        for (i, eta) in self.etas.iter().enumerate() {
            if i < self.times.len() {
                cumulative += self.times[i];
                out.push_str(&format!(
                    "{},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                    i + 1,
                    eta,
                    self.gammas[i],
                    self.times[i],
                    cumulative
                ));
            } else {
                out.push_str(&format!("{},{:.17e},,,{:.17e}\n", i + 1, eta, cumulative));
            }
        }
        out
    }
}

/// Builds an admissible schedule by growing the noise from `eta` upward.
pub fn build_admissible_schedule(model: &MeasurementModel, params: &ScheduleParams) -> Result<NoiseLadder> {
    params.validate()?;
    params.check_model(model)?;
    let op_norm = model.op_norm();
    let target = target_eta(params, op_norm);
    let mut rising = vec![model.eta()];
    let mut current = model.eta();
    while current < target {
        if rising.len() > params.max_rungs {
            return Err(Error::ScheduleExplosion {
                rungs: rising.len(),
                eta: current,
                target,
                alpha: params.alpha,
                m: params.m,
                lambda: params.lambda,
                eps: params.eps,
                radius: params.radius,
                c: params.c,
                op_norm,
            });
        }
        let gamma = next_gamma(current * current, params, op_norm)?;
        let mut next = (current * current * (1.0 + gamma)).sqrt();
        // Rounding must not push the realised step above the cap.
        while (next / current).powi(2) - 1.0 > 1.0 {
            next = next.next_down();
        }
        if next <= current {
            return Err(Error::NoAdmissibleGamma {
                eta_sq: current * current,
            });
        }
        rising.push(next);
        current = next;
    }
    rising.reverse();
    let times = rising
        .windows(2)
        .map(|w| running_time((w[0] / w[1]).powi(2) - 1.0, params))
        .collect();
    let ladder = NoiseLadder::from_parts(rising, times, params.clone(), op_norm, model.eta())?;
    let report = validate_schedule(&ladder);
    if !report.passes() {
        return Err(Error::invalid(format!("constructed schedule is not admissible: {report}")));
    }
    Ok(ladder)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Clause {
    FinalNoise,
    InitialNoise,
    GammaCap,
    RunningTime,
    CrossConstraint,
}

/// One admissibility clause. `slack` is the ratio available / required, so
/// the clause holds iff `slack >= 1`; per-rung clauses report their worst rung.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClauseReport {
    pub clause: Clause,
    pub holds: bool,
    pub slack: f64,
    pub worst_rung: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub clauses: Vec<ClauseReport>,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.clauses.iter().all(|c| c.holds)
    }

    pub fn clause(&self, which: Clause) -> &ClauseReport {
        self.clauses
            .iter()
            .find(|c| c.clause == which)
            .expect("every clause is reported")
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.clauses {
            write!(
                f,
                "[{:?}: {} slack {:.4e}{}] ",
                c.clause,
                if c.holds { "ok" } else { "FAIL" },
                c.slack,
                c.worst_rung.map(|r| format!(" at rung {}", r + 1)).unwrap_or_default()
            )?;
        }
        Ok(())
    }
}

fn worst(clause: Clause, ratios: impl Iterator<Item = f64>) -> ClauseReport {
    let mut slack = f64::INFINITY;
    let mut at = None;
    for (i, r) in ratios.enumerate() {
        if r < slack || r.is_nan() {
            slack = r;
            at = Some(i);
        }
    }
    ClauseReport {
        clause,
        holds: slack >= 1.0,
        slack,
        worst_rung: at,
    }
}

/// Checks the three admissibility clauses clause by clause.
pub fn validate_schedule(ladder: &NoiseLadder) -> ValidationReport {
    let p = &ladder.params;
    let n = ladder.etas.len();
    let final_ratio = ladder.etas[n - 1] / ladder.eta;
    let final_noise = ClauseReport {
        clause: Clause::FinalNoise,
        holds: ladder.etas[n - 1] == ladder.eta,
        slack: final_ratio,
        worst_rung: Some(n - 1),
    };
    let target = target_eta(p, ladder.op_norm);
    let initial_noise = ClauseReport {
        clause: Clause::InitialNoise,
        holds: ladder.etas[0] >= target,
        slack: if target == 0.0 { f64::INFINITY } else { ladder.etas[0] / target },
        worst_rung: Some(0),
    };
    let gamma_cap = worst(
        Clause::GammaCap,
        ladder.gammas.iter().map(|&g| if g <= 0.0 { f64::INFINITY } else { 1.0 / g }),
    );
    let running = worst(
        Clause::RunningTime,
        ladder
            .gammas
            .iter()
            .zip(&ladder.times)
            .map(|(&g, &t)| t / running_time(g, p)),
    );
    let a4 = ladder.op_norm.powi(4);
    let cross = worst(
        Clause::CrossConstraint,
        ladder.gammas.iter().zip(&ladder.times).enumerate().map(|(i, (&g, &t))| {
            let need = a4 * (t * t * p.m as f64 + t * p.radius * p.radius);
            let allow = ladder.etas[i].powi(4) / (p.c * g * g);
            if need == 0.0 {
                f64::INFINITY
            } else {
                allow / need
            }
        }),
    );
    ValidationReport {
        clauses: vec![final_noise, initial_noise, gamma_cap, running, cross],
    }
}

/// Order-of-magnitude bound on the rung count `N` with `rho = |A| / (eta sqrt(alpha))`:
/// `rho^2 sqrt(m) L + rho^2 alpha R^2 / sqrt(m) + m^2 / (m L + alpha R^2) + ln(2 + lambda sqrt(d) rho / eps)`.
pub fn rung_count_bound(params: &ScheduleParams, model: &MeasurementModel) -> f64 {
    let rho = model.op_norm() / (model.eta() * params.alpha.sqrt());
    let (m, d) = (params.m as f64, params.d as f64);
    let l = params.log_ratio();
    let r2 = params.radius * params.radius;
    rho * rho * m.sqrt() * l
        + rho * rho * params.alpha * r2 / m.sqrt()
        + m * m / (m * l + params.alpha * r2)
        + (2.0 + params.lambda * d.sqrt() * rho / params.eps).ln()
}

/// Scalar model of the construction: `x_{i+1} = (1 + g_i) x_i` with
/// `g_i = max{g <= 1 : a g^2 + b g <= 2 x_i}`. Returns the first `i` with
/// `x_i >= big_b`.
pub fn quadratic_sequence_steps(a: f64, b: f64, x0: f64, big_b: f64) -> usize {
    assert!(a > 0.0 && b > 0.0 && x0 > 0.0);
    let mut x = x0;
    let mut steps = 0;
    while x < big_b {
        let g = positive_root(a, b, 2.0 * x).min(1.0);
        x *= 1.0 + g;
        steps += 1;
    }
    steps
}

/// `b / x0 + a / b + ln(1 + B / x0)`.
pub fn quadratic_sequence_bound(a: f64, b: f64, x0: f64, big_b: f64) -> f64 {
    b / x0 + a / b + (1.0 + big_b / x0).ln()
}

#[cfg(test)]
pub(crate) fn test_ladder(etas: Vec<f64>, times: Vec<f64>) -> NoiseLadder {
    let p = ScheduleParams::new(1.0, 2, 2, 1.0);
    NoiseLadder::from_parts(etas.clone(), times, p, 1.0, *etas.last().unwrap()).unwrap()
}

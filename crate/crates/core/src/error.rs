use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("score oracle does not support smoothed queries (sigma^2 = {sigma_sq})")]
    UnsupportedSmoothing { sigma_sq: f64 },

    #[error("no admissible gamma > 0 at eta^2 = {eta_sq}")]
    NoAdmissibleGamma { eta_sq: f64 },

    #[error(
        "schedule explosion: {rungs} rungs reached eta = {eta:.6e} of target {target:.6e} \
         (alpha = {alpha}, m = {m}, lambda = {lambda}, eps = {eps}, R = {radius}, C = {c}, |A| = {op_norm})"
    )]
    ScheduleExplosion {
        rungs: usize,
        eta: f64,
        target: f64,
        alpha: f64,
        m: usize,
        lambda: f64,
        eps: f64,
        radius: f64,
        c: f64,
        op_norm: f64,
    },

    #[error("chain diverged at t = {time:.6e}: |x| = {norm:.6e}")]
    Divergence { time: f64, norm: f64 },

    #[error("step budget exceeded: {needed} steps requested, cap is {cap}")]
    StepBudget { needed: u64, cap: u64 },

    #[error("rung {rung}: {source}")]
    AtRung {
        rung: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("experiment {name}: {source}")]
    InExperiment {
        name: String,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn at_rung(self, rung: usize) -> Self {
        Error::AtRung {
            rung,
            source: Box::new(self),
        }
    }

    /// Looks through context wrappers for the underlying cause.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtRung { source, .. } | Error::InExperiment { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn is_divergence(&self) -> bool {
        matches!(self.root(), Error::Divergence { .. })
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

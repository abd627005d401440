//! Annealed Langevin posterior sampling for linear inverse problems.

pub mod error;
pub mod experiments;
pub mod eval;
pub mod langevin;
pub mod linalg;
pub mod measurement;
pub mod rng;
pub mod samplers;
pub mod schedule;
pub mod scores;
pub mod special;

pub use error::{Error, Result};
pub use eval::GaussianSummary;
pub use langevin::{ChainState, StepPolicy};
pub use measurement::{build_coupled_ladder, simulate_measurement, CoupledObservations, MeasurementModel};
pub use rng::{ChainRng, Purpose, SeedStream};
pub use samplers::{
    compressed_sensing, gaussian_sampler, posterior_sampler, Initializer, RunArtifact, RunConfig, TrajectorySpec,
};
pub use schedule::{build_admissible_schedule, validate_schedule, GammaRule, NoiseLadder, ScheduleParams};
pub use scores::{PriorSpec, ScoreOracle};

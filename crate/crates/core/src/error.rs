use thiserror::Error;

/// Errors raised by model construction, solvers and analyses.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("negative flux {rate} into patch {to} from patch {from}")]
    NegativeFlux { to: usize, from: usize, rate: f64 },

    #[error("migration graph is not strongly connected: patches {unreachable:?} are not mutually reachable from patch 1")]
    Reducible { unreachable: Vec<usize> },

    #[error("invalid migration data: {0}")]
    InvalidMigration(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("kernel of the migration matrix is not one-dimensional (residual {residual:e})")]
    SingularBeyondRankOne { residual: f64 },

    #[error("kernel component {index} vanishes; the migration graph is reducible")]
    ZeroKernelComponent { index: usize },

    #[error(
        "step size underflow at t = {t} (h = {h:e}); system too stiff for the explicit integrator"
    )]
    StepSizeUnderflow { t: f64, h: f64 },

    #[error("integrator exceeded {max_steps} steps before reaching t = {horizon}")]
    MaxStepsExceeded { max_steps: usize, horizon: f64 },

    #[error("equilibrium solve failed at beta = {beta}: {reason}")]
    ConvergenceFailure { beta: f64, reason: String },

    #[error("solver converged to a non-positive state at beta = {beta}")]
    NonPositiveSolution { beta: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("two-block partition invalid: {0}")]
    PartitionInvalid(String),

    #[error("equal growth rates in both blocks: dispersal is detrimental for every beta > 0")]
    EqualGrowthRates,

    #[error("hypotheses imply contradictory relations: {0}")]
    ContradictoryHypotheses(String),

    #[error("V = diag(gamma) - epsilon*Gamma is singular")]
    SingularV,

    #[error("degenerate rates: transmission equals recovery in patch {patch}")]
    DegenerateRates { patch: usize },

    #[error("total population {given} too small; must exceed {minimal}")]
    NTooSmall { given: f64, minimal: f64 },
}

impl Error {
    /// True for errors caused by invalid model data rather than by a solver.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::StepSizeUnderflow { .. }
                | Error::MaxStepsExceeded { .. }
                | Error::ConvergenceFailure { .. }
                | Error::NonPositiveSolution { .. }
                | Error::SingularBeyondRankOne { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

use crate::integrator::Trajectory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("weight matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("network needs at least 2 agents, got {0}")]
    TooFewAgents(usize),

    #[error("negative weight {value} at ({row}, {col})")]
    NegativeWeight { row: usize, col: usize, value: f64 },

    #[error("non-finite weight at ({row}, {col})")]
    NonFiniteWeight { row: usize, col: usize },

    #[error("nonzero self-weight {value} for agent {index}")]
    NonzeroDiagonal { index: usize, value: f64 },

    #[error("agent {row} has no outgoing influence weights")]
    ZeroOutDegreeRow { row: usize },

    #[error("row {row} sums to {sum}, expected 1")]
    RowSumMismatch { row: usize, sum: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, got {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter {name}[{index}] = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        index: usize,
        value: f64,
        reason: &'static str,
    },

    #[error("resource level must be positive, got {0}")]
    NonPositiveResource(f64),

    #[error("equilibrium is infeasible: {0}")]
    InfeasibleEquilibrium(String),

    /// Integration hit an overflow or NaN. `partial` holds every sample
    /// stored before the failure when the caller asked for a trajectory.
    #[error("non-finite state at t = {time}")]
    NonFiniteState {
        time: f64,
        partial: Option<Box<Trajectory>>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NonSymmetric(f64),

    #[error("invalid sustainability box: {0}")]
    InvalidBox(&'static str),

    #[error("initial log-resource {v0} lies outside ({v_min}, {v_max})")]
    InitialStateOutsideBox { v0: f64, v_min: f64, v_max: f64 },

    #[error("trajectory ends at t = {end}, before the horizon {t_max}")]
    HorizonNotCovered { end: f64, t_max: f64 },

    #[error("no minimal sustainability window: {0}")]
    WindowInfeasible(String),

    #[error("sociability theta[{index}] = {value} must be positive")]
    NonPositiveTheta { index: usize, value: f64 },

    #[error("scaling factor delta = {0} must be positive")]
    NonPositiveDelta(f64),

    #[error("{m} edges cannot make {n} agents strongly connected (need at least {n})")]
    TooFewEdges { n: usize, m: usize },

    #[error("{m} edges exceed the {max} possible directed edges")]
    TooManyEdges { m: usize, max: usize },

    #[error("no strongly connected graph found after {0} draws")]
    ConnectivityResampleExhausted(usize),

    #[error("social dominance fails for agents {0:?}")]
    AssumptionThreeViolated(Vec<usize>),

    #[error("sampling exhausted after {attempts} attempts: {what}")]
    SamplingExhausted { what: &'static str, attempts: usize },
}

//! Error types shared across the crate.

use thiserror::Error;

/// Parameter-file or parameter-validation failure.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for key `{key}`")]
    InvalidValue { key: String, value: String },
    #[error("invalid parameters: {0}")]
    Invariant(String),
}

/// Model-construction failure.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("state space has {size} states, exceeding the cap of {cap}")]
    StateSpaceTooLarge { size: usize, cap: usize },
    #[error("action {action} is infeasible in state {state}")]
    InfeasibleAction { state: String, action: String },
    #[error("uniformization constant {eta} outside (0, {min_sojourn}]")]
    BadEta { eta: f64, min_sojourn: f64 },
    #[error("singular fundamental matrix for the distance chain")]
    SingularChain,
}

/// Solver failure.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("value iteration did not converge after {sweeps} sweeps (span {span:.3e})")]
    RviNotConverged { sweeps: usize, span: f64 },
    #[error("stationary distribution did not converge after {iters} iterations (residual {residual:.3e})")]
    StationaryNotConverged { iters: usize, residual: f64 },
    #[error(
        "multiplier search did not converge after {iters} iterations; \
         beta trace: {trace:?}"
    )]
    MultiplierNotConverged { iters: usize, trace: Vec<f64> },
    #[error(
        "rejection constraint rho = {rho} is infeasible: best achievable \
         weighted rejection probability is {achieved:.6}"
    )]
    InfeasibleConstraint { rho: f64, achieved: f64 },
    #[error("no stationary mass on {0} arrival events")]
    ZeroArrivalMass(&'static str),
    #[error("instance too large for brute-force policy enumeration ({policies} policies)")]
    TooLargeForBruteForce { policies: f64 },
}

/// Simulation failure.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("decision rule returned infeasible action {action} in state {state}")]
    InfeasibleAction { state: String, action: String },
    #[error("invalid simulation config: {0}")]
    BadConfig(String),
}

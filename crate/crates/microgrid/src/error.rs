//! Error types for configuration, solving, analysis, and simulation.

use thiserror::Error;

/// Configuration parsing or validation failure.
#[derive(Debug, Error)]
pub enum ConfigError {
    /// The config text is not valid TOML or contains unknown keys. The
    /// underlying message lists the valid keys for the offending section.
    #[error("config parse error: {0}")]
    Parse(String),
    /// A parameter that must be strictly positive is zero or negative.
    #[error("parameter `{key}` must be strictly positive, got {value}")]
    NonPositive { key: &'static str, value: f64 },
    /// A parameter is NaN or infinite.
    #[error("parameter `{key}` is not finite")]
    NonFinite { key: &'static str },
    /// An unknown preset name was requested.
    #[error("unknown preset `{0}`, expected one of `rx-gg1`, `rx-eq1`, `rx-ll1`")]
    UnknownPreset(String),
    /// An unknown model name was requested.
    #[error("unknown model `{0}`, expected one of `detailed`, `em5`, `conv3`, `hf3`, `all`")]
    UnknownModel(String),
}

/// Equilibrium solver failure.
#[derive(Debug, Error)]
pub enum EquilibriumError {
    /// Newton iteration (and the simulation fallback) failed to reach the
    /// residual tolerance; the best residual found is reported.
    #[error("equilibrium solve did not converge for {kind}: best residual {best_residual:.3e} after {iterations} iterations")]
    NoConvergence {
        kind: crate::models::ModelKind,
        best_residual: f64,
        iterations: usize,
    },
    /// The iteration converged to a point with a non-physical bus voltage.
    #[error("equilibrium rejected: non-physical voltage V = {voltage:.3} V")]
    NonPhysical { voltage: f64 },
    /// The supplied initial guess has the wrong dimension.
    #[error("initial guess has dimension {got}, expected {expected}")]
    BadGuess { got: usize, expected: usize },
}

/// Linearization failure.
#[derive(Debug, Error)]
pub enum LinearizeError {
    /// The mass matrix is singular or numerically near-singular.
    #[error("mass matrix is singular (condition estimate {cond:.3e})")]
    SingularMass { cond: f64 },
    /// Droop gains must be strictly positive to scale the droop rows.
    #[error("analytic linearization requires strictly positive droop gains, got {key} = {value}")]
    ZeroGain { key: &'static str, value: f64 },
}

/// Eigenvalue analysis or sweep failure.
#[derive(Debug, Error)]
pub enum StabilityError {
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Linearize(#[from] LinearizeError),
    /// The QR/Schur iteration failed to converge (rare).
    #[error("eigenvalue iteration did not converge for a {n}x{n} matrix")]
    EigenFailure { n: usize },
    /// No stable/unstable sign change inside the supplied bracket.
    #[error("no stability sign change in bracket [{lo:.3e}, {hi:.3e}]")]
    NoSignChange { lo: f64, hi: f64 },
}

/// Simulation failure.
#[derive(Debug, Error)]
pub enum SimError {
    /// Adaptive step size shrank below the useful limit: probable
    /// finite-time blow-up (expected for strongly unstable gain settings).
    #[error("step size underflow at t = {t:.6} s: probable finite-time blow-up")]
    StepUnderflow { t: f64 },
    /// A state entry became NaN or infinite.
    #[error("non-finite state at t = {t:.6} s")]
    NonFinite { t: f64 },
    /// Simulation options are out of range.
    #[error("invalid simulation options: {0}")]
    BadOptions(String),
    /// The initial condition does not match the model layout.
    #[error("initial state has dimension {got}, expected {expected}")]
    BadInitial { got: usize, expected: usize },
    /// The requested start could not be produced (equilibrium solve failed).
    #[error("start state unavailable: {0}")]
    StartUnavailable(String),
}

/// Any failure in the library, for callers that do not need to distinguish.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Linearize(#[from] LinearizeError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

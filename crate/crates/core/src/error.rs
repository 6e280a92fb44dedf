use thiserror::Error;

/// Errors raised by the solvers, filters and model loader.
#[derive(Debug, Error)]
pub enum GameError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{name} is not positive semidefinite (min eigenvalue {min_eig:.3e})")]
    NotPsd { name: String, min_eig: f64 },

    #[error("innovation covariance singular: {name}{}", step_suffix(*.step))]
    InnovationSingular { name: String, step: Option<usize> },

    #[error("gain Hessian singular for player {player} at step {step}")]
    GainHessianSingular { player: u8, step: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("non-stabilizing solution: spectral radii {rho1:.6}, {rho2:.6}")]
    NonStabilizing { rho1: f64, rho2: f64 },

    #[error("steady-state solve refused: {0}")]
    NotSteadyReady(String),

    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("horizon mismatch: {0}")]
    HorizonMismatch(String),

    #[error("time index {k} out of range 0..={horizon}")]
    IndexOutOfRange { k: usize, horizon: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn step_suffix(step: Option<usize>) -> String {
    match step {
        Some(k) => format!(" at step {k}"),
        None => String::new(),
    }
}

pub type Result<T, E = GameError> = std::result::Result<T, E>;

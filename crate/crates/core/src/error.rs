use thiserror::Error;

use crate::characteristics::TrajectoryPoint;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration invariant failed; the message names the broken hypothesis.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("missing boundary data at t = {0}")]
    MissingBoundaryData(f64),

    /// A characteristic left the open interval (0, 1).
    #[error("confinement violated at s = {s:.6} (x = {x:.6}); trajectory has {} points", trajectory.len())]
    ConfinementViolated {
        s: f64,
        x: f64,
        trajectory: Vec<TrajectoryPoint>,
    },

    #[error("runtime bound violation at step {step}: {detail}")]
    BoundViolation { step: usize, detail: String },

    #[error(
        "picard iteration did not converge in {iterations} iterations (last residual {last:.3e})"
    )]
    PicardNotConverged {
        iterations: usize,
        last: f64,
        residuals: Vec<f64>,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("corrupt artifact: {0}")]
    Corrupt(String),
}

impl Error {
    /// Attach a step index to a propagated error from the solver loop.
    pub fn at_step(self, step: usize) -> Self {
        match self {
            Error::ConfinementViolated { .. } => Error::BoundViolation {
                step,
                detail: self.to_string(),
            },
            other => other,
        }
    }
}

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HdgError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("singular local system on element {element} (smallest pivot {pivot:e})")]
    SingularLocal { element: usize, pivot: f64 },

    #[error("global linear solve failed: {0}")]
    GlobalSolve(String),

    #[error("stabilization not admissible: min(tau - a.n) = {min_margin:e} on element {element}, face {face}")]
    Inadmissible {
        element: usize,
        face: usize,
        min_margin: f64,
    },

    #[error("Newton iteration did not converge after {iterations} iterations (increment {increment:e}, residual {residual:e})")]
    NewtonDiverged {
        iterations: usize,
        increment: f64,
        residual: f64,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HdgError>;

use thiserror::Error;

/// Errors raised by the laboratory's operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("point {point:?} lies outside the admissible domain of `{potential}`")]
    Domain { potential: String, point: Vec<f64> },

    #[error("convexity failure at node {node}: minimum Hessian eigenvalue {min_eig:.3e}")]
    Convexity { node: usize, min_eig: f64 },

    #[error("section is empty at grid resolution (h = {height:.3e})")]
    Resolution { height: f64 },

    #[error("section is clipped by the domain boundary (h = {height:.3e})")]
    Clipped { height: f64 },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("sign violation: cell {cell} has mass {mass:.3e} below tolerance {tol:.3e}")]
    Sign { cell: usize, mass: f64, tol: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("region is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("undefined fit: {0}")]
    Fit(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

use thiserror::Error;

/// Errors raised anywhere in the discretization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("perpendicular through ({x:.6e}, {y:.6e}) does not meet the boundary arc inside its bracket")]
    NoIntersection { x: f64, y: f64 },

    #[error("root solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("triangle {triangle} has more than one edge on a curved boundary arc")]
    ThreeBoundaryVertices { triangle: usize },

    #[error("singular DOF system for RT_{k} reference basis")]
    SingularBasis { k: usize },

    #[error("unsupported quadrature degree {0} (maximum 20)")]
    UnsupportedDegree(usize),

    #[error("degenerate triangle (det B = {det:.3e})")]
    DegenerateTriangle { det: f64 },

    #[error("modified element on triangle {triangle} is ill-conditioned (condition estimate {cond:.3e})")]
    IllConditioned { triangle: usize, cond: f64 },

    #[error("missing modified element for boundary triangle {0}")]
    MissingModifiedElement(usize),

    #[error("field not evaluable at ({x:.6e}, {y:.6e}): {reason}")]
    NotEvaluable { x: f64, y: f64, reason: String },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("Gram matrix is not positive definite")]
    GramNotPositive,

    #[error("element index {0} out of range")]
    ElementOutOfRange(usize),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

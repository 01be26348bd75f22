use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter coordinate {0} outside [-1, 1]")]
    XiOutOfRange(f64),
    #[error("element {0} has zero reference length")]
    DegenerateElement(usize),
    #[error("expected {expected} nodal states, got {got}")]
    StateCount { expected: usize, got: usize },
    #[error("singular rotational coupling: relative rotation angle {0} rad is too close to pi")]
    SingularCoupling(f64),
    #[error("closest-point projection did not converge in {0} iterations")]
    ProjectionNotConverged(usize),
    #[error("interaction angle {0:.3e} rad is too small for a point coupling")]
    IllPosedProjection(f64),
    #[error("Newton iteration did not converge at t = {time} (residual {residual:.3e} after {iterations} iterations)")]
    NotConverged {
        time: f64,
        residual: f64,
        iterations: usize,
    },
    #[error("linear solve failed: {0}")]
    LinearSolve(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("node {0} carries no translational Dirichlet condition")]
    NotConstrained(usize),
    #[error("nodes {a} and {b} do not coincide in the reference configuration")]
    NonCoincidentNodes { a: usize, b: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("model file: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Failures of the nonlinear or linear solution, as opposed to input errors.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::NotConverged { .. } | Error::LinearSolve(_) | Error::SingularCoupling(_)
        )
    }
}

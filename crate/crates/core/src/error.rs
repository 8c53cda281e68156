use thiserror::Error;

/// Everything that can go wrong inside the toolkit.
///
/// The variants are coarse on purpose: the CLI maps them onto exit codes
/// (`Parameter`/`Construction`/`Precondition` are configuration problems,
/// the rest are numeric failures).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("root solve did not converge at x = {x} ({detail})")]
    RootSolve { x: f64, detail: String },

    #[error("|z| = {modulus} exceeds the admissible radius {radius}")]
    OutsideRadius { modulus: f64, radius: f64 },

    #[error("iteration did not converge: residual {residual:.3e} at depth {depth}; try a larger depth")]
    NotConverged { residual: f64, depth: usize },

    #[error("positivity lost on fiber {fiber}: min h = {min:.3e}")]
    PositivityLost { fiber: i64, min: f64 },

    #[error("branch cut crossed on fiber {fiber} (arg = {arg:.3}); use a smaller stencil")]
    BranchCut { fiber: i64, arg: f64 },

    #[error("orbit left the space: {0}")]
    OrbitEscaped(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by the caller's inputs rather than by the numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Parameter(_) | Error::Construction(_) | Error::Precondition(_) | Error::OutsideRadius { .. }
        )
    }
}

use thiserror::Error;

/// Errors raised by model construction, spectral computations and the
/// expansion pipeline.
#[derive(Debug, Error)]
pub enum CoverError {
    #[error("config error: {0}")]
    Config(String),

    #[error("non-stochastic row: state {state} has outgoing probability {sum}")]
    NonStochasticRow { state: usize, sum: f64 },

    #[error("invalid edge: {0}")]
    InvalidEdge(String),

    #[error("non-integer psi on edge {edge}: {value}")]
    NonIntegerPsi { edge: usize, value: f64 },

    #[error("chain is reducible or periodic (second eigenvalue modulus {slem})")]
    NotMixing { slem: f64 },

    #[error("branch not surjective onto a union of cells: {0}")]
    BranchNotSurjective(String),

    #[error("non-centered model: drift {drift:?}")]
    NonCentered { drift: Vec<f64> },

    #[error("aliasing: grid too coarse ({points} points per axis, need more than {required})")]
    Aliasing { points: usize, required: usize },

    #[error("near-degenerate leading eigenvalue (gap {gap:e})")]
    NearDegenerate { gap: f64 },

    #[error("eigen-solver did not converge: {0}")]
    NonConvergence(String),

    #[error("branch crossing detected at theta={theta:?} (jump {jump:e} > bound {bound:e})")]
    BranchCrossing {
        theta: Vec<f64>,
        jump: f64,
        bound: f64,
    },

    #[error("jet degree {have} insufficient: need at least {need}")]
    InsufficientDegree { have: usize, need: usize },

    #[error("polynomial fit residual {residual:e} above tolerance {tol:e}")]
    FitResidual { residual: f64, tol: f64 },

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("unit-modulus twisted eigenvalue at theta={theta:?} (spectral radius {specrad}): the walk sees a boundary character")]
    BoundaryCharacter { theta: Vec<f64>, specrad: f64 },

    #[error("fiber extension not mixing: {0}")]
    FiberNotMixing(String),

    #[error("resource guard: {0}")]
    ResourceGuard(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CoverError {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        use CoverError::*;
        match self {
            Config(_) | InvalidArgument(_) | Io(_) | Json(_) => 1,
            NonStochasticRow { .. }
            | InvalidEdge(_)
            | NonIntegerPsi { .. }
            | NotMixing { .. }
            | BranchNotSurjective(_)
            | NonCentered { .. } => 2,
            NearDegenerate { .. }
            | BranchCrossing { .. }
            | DegenerateCovariance(_)
            | BoundaryCharacter { .. }
            | FiberNotMixing(_) => 3,
            ResourceGuard(_) | Aliasing { .. } => 4,
            NonConvergence(_) | InsufficientDegree { .. } | FitResidual { .. } | Numerical(_) => 5,
        }
    }

    /// Name of the module the error originates from, used in CLI messages.
    pub fn provenance(&self) -> &'static str {
        use CoverError::*;
        match self {
            Config(_) | Io(_) | Json(_) | InvalidArgument(_) => "config",
            NonStochasticRow { .. } | InvalidEdge(_) | NonIntegerPsi { .. } | NotMixing { .. } => {
                "model"
            }
            BranchNotSurjective(_) => "ulam",
            NonCentered { .. } => "model",
            Aliasing { .. } => "floquet",
            NearDegenerate { .. } | NonConvergence(_) | BranchCrossing { .. } => "twisted",
            FiberNotMixing(_) | BoundaryCharacter { .. } => "twisted",
            InsufficientDegree { .. } | FitResidual { .. } | DegenerateCovariance(_) => {
                "resonance"
            }
            ResourceGuard(_) => "correlation",
            Numerical(_) => "numerics",
        }
    }
}

pub type Result<T> = std::result::Result<T, CoverError>;

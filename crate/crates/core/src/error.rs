use thiserror::Error;

/// Errors raised anywhere in the discretization and solver stack.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("mesh of {cells} cells is not divisible by 2^{levels} required for coarsening")]
    NonCoarsenable { cells: usize, levels: u32 },

    #[error("nonpositive depth {depth:e}{}", cell_suffix(.cell))]
    NonpositiveDepth { cell: Option<usize>, depth: f64 },

    #[error("nonpositive depth {depth:e} while perturbing cell {cell}, component {component}")]
    PerturbedNonpositiveDepth {
        cell: usize,
        component: usize,
        depth: f64,
    },

    #[error("degenerate HLL wave-speed estimates (S_L = {s_left:e}, S_R = {s_right:e})")]
    DegenerateSpeeds { s_left: f64, s_right: f64 },

    #[error("singular characteristic eigenbasis at reference depth {depth:e}")]
    SingularEigenbasis { depth: f64 },

    #[error("ghost layers missing or inconsistent: {0}")]
    MissingGhosts(String),

    #[error("inconsistent boundary specification: {0}")]
    InconsistentSpec(String),

    #[error("perturbation {epsilon:e} vanishes against value {value:e} at cell {cell}, component {component}")]
    EpsilonTooSmall {
        cell: usize,
        component: usize,
        value: f64,
        epsilon: f64,
    },

    #[error("shape mismatch: expected {expected}, got {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("singular diagonal block at cell {cell}")]
    SingularDiagonalBlock { cell: usize },

    #[error("singular coarse-level matrix")]
    SingularMatrix,

    #[error("no real root: {0}")]
    NoRealRoot(String),

    #[error("observed order needs positive errors, got {coarse:e} and {fine:e}")]
    NonpositiveError { coarse: f64, fine: f64 },

    #[error("point ({x}, {y}) lies outside the domain")]
    PointOutsideDomain { x: f64, y: f64 },

    #[error("unknown case `{0}`")]
    UnknownCase(String),

    #[error("case `{0}` has no exact-solution oracle")]
    OracleMissing(String),

    #[error("level {level} failed to converge after {steps} Newton steps (residual {residual:e})")]
    LevelNotConverged {
        level: usize,
        steps: usize,
        residual: f64,
    },
}

impl SolverError {
    /// Attaches a cell index to a depth error raised by a pointwise model
    /// evaluation.
    pub fn at_cell(self, cell: usize) -> Self {
        match self {
            SolverError::NonpositiveDepth { cell: None, depth } => SolverError::NonpositiveDepth {
                cell: Some(cell),
                depth,
            },
            other => other,
        }
    }
}

fn cell_suffix(cell: &Option<usize>) -> String {
    cell.map(|c| format!(" at cell {c}")).unwrap_or_default()
}

pub type Result<T> = std::result::Result<T, SolverError>;

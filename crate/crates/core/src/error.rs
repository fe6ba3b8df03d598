use thiserror::Error;

pub type Result<T> = std::result::Result<T, VwsError>;

#[derive(Debug, Error)]
pub enum VwsError {
    #[error("grid needs at least 4 cells per side, got {0}")]
    InvalidGrid(usize),

    #[error("fields live on different grids ({0} vs {1} cells per side)")]
    GridMismatch(usize, usize),

    #[error("argument {value} outside domain {domain}")]
    DomainViolation { value: f64, domain: &'static str },

    #[error("regularization parameter must be positive, got {0}")]
    InvalidEpsilon(f64),

    #[error("iteration did not converge after {iterations} steps (residual {residual:.3e}){}", context_suffix(.context))]
    NonConvergence {
        iterations: usize,
        residual: f64,
        /// Best iterate found before giving up, when available.
        best: Option<Vec<f64>>,
        context: Option<String>,
    },

    #[error("divergence source has nonzero mean {0:.3e}")]
    IncompatibleSource(f64),

    #[error("boundary data violates the compatibility condition: ∫ g·n = {0:.3e}")]
    IncompatibleBoundaryData(f64),

    #[error("boundary data has zero norm")]
    ZeroBoundaryData,

    #[error("boundary data is not tangential: max |g·n| = {0:.3e}")]
    NonTangentialData(f64),

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn context_suffix(ctx: &Option<String>) -> String {
    match ctx {
        Some(c) => format!(" [{c}]"),
        None => String::new(),
    }
}

impl VwsError {
    /// Attaches a context label to a convergence failure; other errors pass through.
    pub fn with_context(self, label: impl Into<String>) -> Self {
        match self {
            VwsError::NonConvergence {
                iterations,
                residual,
                best,
                context,
            } => {
                let label = label.into();
                let context = Some(match context {
                    Some(inner) => format!("{label}: {inner}"),
                    None => label,
                });
                VwsError::NonConvergence {
                    iterations,
                    residual,
                    best,
                    context,
                }
            }
            other => other,
        }
    }
}

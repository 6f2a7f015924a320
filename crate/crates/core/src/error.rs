use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("negative count {value} in {location}")]
    NegativeCount { location: String, value: i64 },
    #[error("supplementary margin {margin} must be positive (found 0)")]
    ZeroMargin { margin: String },
    #[error(
        "fully observed cell y11[{row}][{col}] is 0; strict validation requires positive cells"
    )]
    ZeroCell { row: usize, col: usize },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("system violates the dominance-lemma hypotheses: {0}")]
    Hypothesis(String),
    #[error("singular matrix: pivot {pivot:e} in column {column} is below {threshold:e}")]
    Singular {
        column: usize,
        pivot: f64,
        threshold: f64,
    },
    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("odds ratio g is undefined: {0}")]
    UndefinedG(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("negative expected count {value} at cell ({i},{j},{k},{l})")]
    NegativeMu {
        i: usize,
        j: usize,
        k: usize,
        l: usize,
        value: f64,
    },
    #[error("zero pattern would force -inf into {0}")]
    InfiniteTerm(String),
}

#[derive(Debug, Error)]
pub enum DiagnosticError {
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("boundary forms disagree for {variable} level {level}: {detail}")]
    Inconsistent {
        variable: &'static str,
        level: usize,
        detail: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Table(#[from] TableError),
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Diagnostic(#[from] DiagnosticError),
    #[error("{model} needs a square table to solve for its varying odds (table is {rows}x{cols})")]
    NotSquare {
        model: crate::models::ModelId,
        rows: usize,
        cols: usize,
    },
    #[error("invalid boundary constraint: {0}")]
    Constraint(String),
}

impl FitError {
    /// Input-validation failures, as opposed to numerical ones.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            FitError::Table(_) | FitError::Constraint(_) | FitError::NotSquare { .. }
        )
    }
}

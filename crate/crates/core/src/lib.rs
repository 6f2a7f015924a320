//! Nonignorable-nonresponse log-linear models for two-way incomplete
//! contingency tables, with detection and diagnosis of boundary solutions.

pub mod datasets;
pub mod diagnostics;
pub mod error;
pub mod fitting;
pub mod lambda;
pub mod linalg;
pub mod models;
pub mod report;
pub mod serde_float;
pub mod table;

pub use error::{DiagnosticError, FitError, LinalgError, ModelError, TableError};
pub use fitting::{
    fit_em, fit_unconstrained, fit_with_boundary, BoundaryOptions, EmOptions, FitResult, Start,
    ZeroSet,
};
pub use models::{CellEstimates, Cells, ModelId, OddsVector, Pattern};
pub use report::{analyze, check, AnalysisReport, CheckReport, Verdict, SCHEMA};
pub use table::{Format, IncompleteTable, MarginSums, Validation};

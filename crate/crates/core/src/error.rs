use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid has {cells} cells, above the configured cap of {cap}")]
    GridTooLarge { cells: usize, cap: usize },

    #[error("operator evaluation requires p >= 2, got p = {0}")]
    OperatorRange(f64),

    #[error("cell-pair integral diverges for sp = {sp}; exact near-field quadrature needs sp < 1")]
    DivergentNearField { sp: f64 },

    #[error("point with norm {norm:e} lies outside the projection tube")]
    OutsideTube { norm: f64 },

    #[error("shifted retraction evaluated on its singular set")]
    RetractionSingular,

    #[error("all {0} shift draws hit the retraction singular set")]
    ShiftRetriesExhausted(usize),

    #[error("test field is nonzero on frozen cell {0}")]
    TestFieldOnFrozen(usize),

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("cannot blow-up normalize a field with zero localized energy")]
    ZeroEnergy,

    #[error("only {found} usable radii, at least 3 are needed")]
    TooFewRadii { found: usize },

    #[error("configuration invalid:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("snapshot format: {0}")]
    Snapshot(String),

    #[error("output directory {0} is not empty (pass --force to overwrite)")]
    OutputExists(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

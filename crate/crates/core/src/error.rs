//! Error and diagnostic types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset is empty")]
    Empty,
    #[error("bad header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("row {row}: expected {expected} cells, found {found}")]
    CellCount {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column {column}: cannot parse `{value}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column {column}: non-binary value `{value}`")]
    NonBinary {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: Y present but S=0 (outcomes are unobserved at the target site)")]
    OutcomeAtTargetSite { row: usize },
    #[error("row {row}: Y missing but S=1")]
    MissingOutcome { row: usize },
    #[error("no target-site rows (need at least one row with S=0)")]
    NoTargetRows,
    #[error("no source-site rows (need at least one row with S=1)")]
    NoSourceRows,
    #[error("weights must be finite, nonnegative, and sum to a positive total")]
    BadWeight,
    #[error("weight vector length {weights} does not match row count {rows}")]
    WeightLength { rows: usize, weights: usize },
}

/// One empirical positivity violation from the data screen.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
#[serde(tag = "kind")]
pub enum Violation {
    /// A single A level in cell (s, w1, w2).
    DegenerateTreatment { s: u8, w1: u8, w2: u8, level: u8 },
    /// A single Z level in cell (s=1, w1, w2, a).
    DegenerateIntermediate { w1: u8, w2: u8, a: u8, level: u8 },
    /// A single M level in cell (s=1, z, w1, w2).
    DegenerateMediator { z: u8, w1: u8, w2: u8, level: u8 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::DegenerateTreatment { s, w1, w2, level } => write!(
                f,
                "only A={level} observed in cell (S={s}, W1={w1}, W2={w2})"
            ),
            Violation::DegenerateIntermediate { w1, w2, a, level } => write!(
                f,
                "only Z={level} observed in cell (S=1, W1={w1}, W2={w2}, A={a})"
            ),
            Violation::DegenerateMediator { z, w1, w2, level } => write!(
                f,
                "only M={level} observed in cell (S=1, Z={z}, W1={w1}, W2={w2})"
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum GlmError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("unknown design variable `{0}`")]
    UnknownVariable(String),
}

#[derive(Debug, Error)]
pub enum EstimationError {
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error("restricted variant forbids A in the {0} model terms")]
    RestrictedTermsContainA(&'static str),
    #[error("degenerate outcome: all source-site rows share Y={0}")]
    DegenerateOutcome(u8),
    #[error("marginal Z density requested on the unrestricted variant")]
    MarginalZOnUnrestricted,
    #[error("positivity violation at row {row}: {factor} is zero with a nonzero indicator")]
    Positivity { row: usize, factor: &'static str },
    #[error("no effective observations: all weights are zero")]
    NoEffectiveObservations,
    #[error("fluctuation did not converge: {0}")]
    FluctuationDiverged(String),
    #[error("mismatched estimator ids when forming effects: {0} vs {1}")]
    MismatchedComponents(String, String),
    #[error("bootstrap failed: {failed} of {total} resamples did not produce estimates")]
    BootstrapFailed { failed: usize, total: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

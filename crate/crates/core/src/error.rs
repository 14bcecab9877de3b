use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("subsystem index {index} out of range for {count} subsystems")]
    SubsystemIndex { index: usize, count: usize },
    #[error("invalid permutation {0:?}")]
    Permutation(Vec<usize>),
    #[error("state is not trace-normalized (trace = {0})")]
    NotNormalized(f64),
    #[error("matrix violates {what}: defect {defect:e}")]
    Invariant { what: &'static str, defect: f64 },
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("rank-deficient retraction (|r_ii| = {0:e}); shrink the step")]
    RankDeficient(f64),
    #[error("layout mismatch: {0}")]
    Layout(String),
    #[error("success probability {0:e} below floor")]
    ProbabilityFloor(f64),
    #[error("solver breakdown: {0}")]
    Solver(String),
    #[error("infeasible problem: {0}")]
    Infeasible(String),
    #[error("config error in field `{field}`: {msg}")]
    Config { field: String, msg: String },
    #[error("protocol document: {0}")]
    Document(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate label: {0}")]
    DuplicateLabel(String),
    #[error("invalid label: {0:?}")]
    InvalidLabel(String),
    #[error("zero-length position for electrode {0}")]
    ZeroPosition(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("unknown montage: {0}")]
    UnknownMontage(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("coincident electrodes {0} and {1}")]
    CoincidentElectrodes(String, String),
    #[error("too few electrodes: need at least {need}, got {got}")]
    TooFewElectrodes { need: usize, got: usize },
    #[error("singular system: {0}")]
    Singular(String),
    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),
    #[error("ill-conditioned matrix: eigenvalue {0:e} below 1e-12")]
    Conditioning(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("channel mismatch: missing [{}], extra [{}]", .missing.join(","), .extra.join(","))]
    ChannelMismatch { missing: Vec<String>, extra: Vec<String> },
    #[error("karcher mean did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("rank-deficient normal equations (use a positive ridge)")]
    RankDeficient,
    #[error("training diverged at epoch {epoch} (loss {loss:e})")]
    Divergence { epoch: usize, loss: f64 },
    #[error("undefined test: {0}")]
    UndefinedTest(&'static str),
    #[error("degenerate channel {0}: zero range or variance")]
    DegenerateChannel(String),
    #[error("epoch set mixes subjects {0} and {1}")]
    MixedSubjects(String, String),
    #[error("unsupported resampling ratio {0}")]
    Ratio(String),
}

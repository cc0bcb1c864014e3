use thiserror::Error;

/// Errors raised by trace ingestion, estimation, bound analysis and fitting.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("not a trace file: expected magic BTRC, found {0:02x?}")]
    BadMagic([u8; 4]),

    #[error("unsupported trace format version {0}")]
    VersionUnsupported(u16),

    #[error("unsupported trace flags {0:#06x}")]
    UnsupportedFlags(u16),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("hidden dimension must be positive")]
    ZeroDimension,

    #[error("sample {0} has no positions (n must be >= 1)")]
    EmptySample(usize),

    #[error("non-finite value in sample {sample}, branch {branch}, position {position}")]
    NonFinite {
        sample: usize,
        branch: char,
        position: usize,
    },

    #[error("sample {sample} has dim {found}, set has dim {expected}")]
    DimMismatch {
        sample: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid trace metadata: {0}")]
    InvalidMetadata(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("duplicate score key ({benchmark}, {metric}, {config}, n_l={n_l})")]
    DuplicateKey {
        benchmark: String,
        metric: String,
        config: String,
        n_l: u32,
    },

    #[error("empty population: no sample reaches n = 1")]
    EmptyPopulation,

    #[error("zero vector in sample {sample}, branch {branch}, position {position}: cosine undefined")]
    ZeroVector {
        sample: usize,
        branch: char,
        position: usize,
    },

    #[error("argument out of range: {0}")]
    OutOfRange(String),

    #[error("negative bound: Upsilon({n}) = {value}")]
    NegativeBound { n: usize, value: f64 },

    #[error("degenerate ratio: psi_cross_aa - psi_cross_ab = {0} must be > 0")]
    DegenerateRatio(f64),

    #[error("degenerate fit: every Upsilon(n) in range is zero")]
    DegenerateFit,

    #[error("logarithm base n = {0} is invalid (n must be > 1)")]
    InvalidBase(f64),

    #[error("non-positive logarithm argument: {0}")]
    NonPositiveLogArgument(String),

    #[error("degenerate scaling constant: psi_equal_ab(1) = 1 gives c = 0")]
    DegenerateConstant,

    #[error("insufficient points: {found} usable, at least {required} required")]
    InsufficientPoints { found: usize, required: usize },

    #[error("non-positive score {score} at n_l = {n_l}")]
    NonPositiveScore { n_l: u32, score: f64 },

    #[error("no common n_l between the two configs")]
    NoCommonPoints,

    #[error("constant series: min = max = {0}")]
    ConstantSeries(f64),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("binomial C({n}, {k}) overflows 64 bits")]
    BinomialOverflow { n: u64, k: i64 },

    #[error("item count {0} outside supported range 0..={max}", max = crate::lattice::MAX_ITEMS)]
    TooManyItems(usize),

    #[error("level {level} outside 0..={n}")]
    LevelOutOfRange { n: usize, level: usize },

    #[error("rank {rank} out of range for level size {size}")]
    RankOutOfRange { rank: u64, size: u64 },

    #[error("item {item} outside universe 1..={n}")]
    ItemOutOfRange { item: usize, n: usize },

    #[error("malformed item set {0:?}")]
    ParseItemSet(String),

    #[error("level restriction violated: map from level {level} needs level+1 <= ceil({n}/2)")]
    LevelRestriction { n: usize, level: usize },

    #[error("coefficient solver did not converge for N={n}, i={level} (best residual {residual:e})")]
    NoConvergence { n: usize, level: usize, residual: f64 },

    #[error("oracle inconsistency: entries with overlap {overlap} deviate by {deviation:e}")]
    OracleInconsistent { overlap: usize, deviation: f64 },

    #[error("oracle size guard: N={n} exceeds {max}")]
    OracleTooLarge { n: usize, max: usize },

    #[error("coefficients are for (N={have_n}, i={have_level}), state is at (N={n}, i={level})")]
    CoefficientMismatch {
        have_n: usize,
        have_level: usize,
        n: usize,
        level: usize,
    },

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("requested {requested} nogoods but only {available} are available")]
    PoolExhausted { requested: usize, available: usize },

    #[error("no good sets at start level {0}")]
    NoGoodsAtStart(usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("rejection guard tripped: {0} consecutive insoluble instances")]
    RejectionGuard(usize),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

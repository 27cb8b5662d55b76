use thiserror::Error;

/// Errors produced by the citation-statistics routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("duplicate paper `{paper_id}` for author `{author_id}`")]
    DuplicatePaper { author_id: String, paper_id: String },

    #[error("duplicate author `{0}`")]
    DuplicateAuthor(String),

    #[error("author id must be non-empty")]
    EmptyAuthorId,

    #[error("year {0} outside the accepted range 1800..=2200")]
    YearOutOfRange(i64),

    #[error("invalid binning scheme: {0}")]
    InvalidScheme(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("dimension mismatch: expected {expected} bins, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("record outside distribution support: {count} paper(s) in bin {bin} which has probability 0")]
    OutsideSupport { bin: usize, count: u64 },

    #[error("no papers")]
    NoPapers,

    #[error("indicator undefined for empty record")]
    EmptyRecord,

    #[error("year data required")]
    YearDataRequired,

    #[error("indicator undefined for author(s): {}", .0.join(", "))]
    IndicatorUndefined(Vec<String>),

    #[error("too few authors: {authors} author(s) for {bins} bins")]
    TooFewAuthors { authors: usize, bins: usize },

    #[error("num_bins must be at least {min}, got {got}")]
    TooFewBins { min: usize, got: usize },

    #[error("author bin {0} has no papers and the pseudocount is zero")]
    EmptyAuthorBin(usize),

    #[error("negative pseudocount {0}")]
    NegativePseudocount(f64),

    #[error("KL divergence undefined: q[{index}] = 0 while p[{index}] > 0")]
    KlSupport { index: usize },

    #[error("author `{author_id}` has {available} papers, {requested} requested")]
    InsufficientPapers {
        author_id: String,
        available: usize,
        requested: usize,
    },

    #[error("empty N list")]
    EmptyNList,

    #[error("paper counts must be at least 1")]
    ZeroPaperCount,

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("ratio undefined: mean citations of the denominator is zero")]
    RatioUndefined,

    #[error("paper `{paper_id}` of author `{author_id}` has no field tag")]
    MissingFieldTag { author_id: String, paper_id: String },

    #[error("unknown field `{0}`")]
    UnknownField(String),

    #[error("field `{0}` has no peers")]
    EmptyField(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

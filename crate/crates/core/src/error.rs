use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Variants are grouped by the stage that produced them so the CLI can map
/// them onto exit codes without string matching.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown {scheme} tag `{label}`")]
    UnknownTag { scheme: &'static str, label: String },

    #[error("invalid document: {0}")]
    InvalidDocument(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: cannot align token `{surface}` with sentence text")]
    SpanReconstruction { line: usize, surface: String },

    #[error("invalid lexicon: {0}")]
    Lexicon(String),

    #[error("invalid question bank: {0}")]
    QuestionBank(String),

    #[error("input too long for exhaustive search: {len} characters (limit {limit})")]
    TooLong { len: usize, limit: usize },

    #[error("invalid color `{0}`: expected six hex digits")]
    InvalidColor(String),

    #[error("scheme `{scheme}` expects {expected} tags but the document is tagged with {found}")]
    SchemeMismatch {
        scheme: String,
        expected: &'static str,
        found: &'static str,
    },

    #[error("invalid style scheme: {0}")]
    Scheme(String),

    #[error("style runs do not tile the document: {0}")]
    NonTiling(String),

    #[error("invalid protocol input: {0}")]
    Protocol(String),

    #[error("timestamps out of order at item {item}: {message}")]
    NonMonotonic { item: usize, message: String },

    #[error("invalid statistical input: {0}")]
    Stats(String),

    #[error("model did not converge: {0}")]
    Convergence(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown label {name:?} for taxonomy {taxonomy}")]
    UnknownLabel { name: String, taxonomy: String },

    #[error("unknown taxonomy specifier {0:?}")]
    UnknownTaxonomy(String),

    #[error("invalid taxonomy: {0}")]
    InvalidTaxonomy(String),

    #[error("duplicate document id {0:?}")]
    DuplicateDocId(String),

    #[error("invalid category id {id} for taxonomy {taxonomy} of arity {arity}")]
    InvalidCategory { id: usize, taxonomy: String, arity: usize },

    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("invalid record: {0}")]
    InvalidRecord(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("documents lack annotation for taxonomy {0}")]
    MissingAnnotation(String),

    #[error("both marginal entropies are zero")]
    DegenerateMarginals,

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("taxonomy mismatch: expected {expected}, found {found}")]
    TaxonomyMismatch { expected: String, found: String },

    #[error("invalid temperature {0}")]
    InvalidTemperature(f64),

    #[error("selection is empty")]
    EmptySelection,

    #[error("invalid Dirichlet concentration: {0}")]
    InvalidAlpha(String),

    #[error("cap infeasible: {0}")]
    CapInfeasible(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("target {0:?} missing from observations")]
    TargetMissing(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("no feasible candidate in search step {0}")]
    NoFeasibleCandidate(usize),

    #[error("brute-force search limited to arity <= {max}, got {arity}")]
    ArityTooLarge { arity: usize, max: usize },

    #[error("document {doc_id:?} has no score {score:?}")]
    MissingScore { doc_id: String, score: String },

    #[error("insufficient corpus: {available} tokens available for a budget of {budget}")]
    InsufficientCorpus { available: u64, budget: u64 },

    #[error("too few points: {points} points for k = {k}")]
    TooFewPoints { points: usize, k: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid embeddings: {0}")]
    InvalidEmbeddings(String),

    #[error("invalid lab spec: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

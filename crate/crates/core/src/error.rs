use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("input is not valid UTF-8 at byte offset {offset}")]
    NonUtf8 { offset: u64 },

    #[error("invalid triple: {0}")]
    InvalidTriple(String),

    #[error("unknown predicate `{predicate}`; available: {}", available.join(", "))]
    UnknownPredicate { predicate: String, available: Vec<String> },

    #[error("degenerate graph: {0}")]
    Degenerate(String),

    #[error("{kind} id {index} out of range (size {len})")]
    IndexOutOfRange { kind: &'static str, index: usize, len: usize },

    #[error("score is NaN")]
    NanScore,

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperParams(String),

    #[error("no sampleable edge: every subject is linked to all {n_objects} objects")]
    NoSampleableEdge { n_objects: usize },

    #[error("training diverged at sample {sample_index} (subject {subject}): {parameter} became non-finite{hint}")]
    Divergence { sample_index: usize, subject: usize, parameter: &'static str, hint: &'static str },

    #[error("predicate `{predicate}` has no subject with degree >= 2 to hold out")]
    NoEligibleSubject { predicate: String },

    #[error("subject {subject} has a held-out object but no recommendation list")]
    MissingRecommendation { subject: usize },

    #[error("empty test set")]
    EmptyTestSet,

    #[error("regression needs at least 2 points, got {0}")]
    TooFewPoints(usize),

    #[error("regression x values have zero variance")]
    ZeroVariance,

    #[error("predicate sets differ; only in profiles: [{}], only in reports: [{}]", only_profiles.join(", "), only_reports.join(", "))]
    PredicateMismatch { only_profiles: Vec<String>, only_reports: Vec<String> },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSynthetic(String),

    #[error("missing artifacts: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingArtifacts(Vec<PathBuf>),

    #[error("malformed model file: {0}")]
    ModelFormat(String),

    #[error("{predicate} / {method} / repeat {repeat}: {source}")]
    Cell {
        predicate: String,
        method: String,
        repeat: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    TomlDe(#[from] toml::de::Error),

    #[error("config write error: {0}")]
    TomlSer(#[from] toml::ser::Error),
}

use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("adjacency line {line}: unknown region label `{label}`")]
    UnknownLabel { line: usize, label: String },

    #[error("adjacency line {line}: self-edge on region `{label}`")]
    SelfEdge { line: usize, label: String },

    #[error("adjacency line {line}: expected two labels, found `{content}`")]
    MalformedEdge { line: usize, content: String },

    #[error("adjacency stream contains no edges")]
    EmptyAdjacency,

    #[error("graph error: {0}")]
    Graph(String),

    #[error("count panel: {0}")]
    Panel(String),

    #[error("count panel: missing cell (region={region}, group={group}, time={time})")]
    MissingCell { region: String, group: String, time: String },

    #[error("count panel: duplicate cell (region={region}, group={group}, time={time})")]
    DuplicateCell { region: String, group: String, time: String },

    #[error(
        "count panel: deaths {deaths} exceed population {population} \
         at (region={region}, group={group}, time={time})"
    )]
    DeathsExceedPopulation {
        region: String,
        group: String,
        time: String,
        deaths: i64,
        population: i64,
    },

    #[error("count panel line {line}: negative {field} ({value})")]
    NegativeValue { line: usize, field: &'static str, value: i64 },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },

    #[error("matrix with {rows} rows exceeds the materialization limit of {limit}")]
    TooLarge { rows: usize, limit: usize },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("layer (group={group}, time={time}) has zero total deaths; its national rate is zero")]
    ZeroNationalRate { group: String, time: String },

    #[error("layer (group={group}, time={time}) has zero total population")]
    ZeroPopulationLayer { group: String, time: String },

    #[error("improper posterior at (region={region}, group={group}, time={time}): shape a+Y is zero")]
    ImproperPosterior { region: String, group: String, time: String },

    #[error("sample store holds no draws")]
    EmptyStore,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("file format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by bad inputs rather than failures at run time.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io(_) | Error::Eigen(_) | Error::NotPositiveDefinite(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

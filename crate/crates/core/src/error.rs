use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report.
///
/// Each variant has a stable machine-readable code (see [`Error::code`]) that
/// the command-line front end prints on its diagnostics stream.
#[derive(Debug, Error)]
pub enum Error {
    // Ingestion.
    #[error("column `{0}` is not present in the header")]
    MissingColumn(String),
    #[error("row {row} has {found} fields, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("cannot parse value {value:?} at row {row}, column `{column}`")]
    UnparseableValue {
        row: usize,
        column: String,
        value: String,
    },
    #[error("duplicate attribute name `{0}`")]
    DuplicateAttribute(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    // Data model.
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("tuple {0} is already deleted")]
    AlreadyDeleted(usize),
    #[error("tuple index {0} is out of range")]
    OutOfRange(usize),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),

    // Estimation.
    #[error("design matrix is rank deficient (collinear encoded columns)")]
    RankDeficient,
    #[error("both a treated and a control tuple are required")]
    DegenerateGroups,
    #[error("Woodbury capacitance matrix is numerically singular")]
    SingularCapacitance,
    #[error("removal leaves fewer rows than design columns")]
    RankLost,
    #[error("Neumann guard failed: perturbation norm {0:.3e} is not below the threshold")]
    NormTooLarge(f64),
    #[error("logistic fit did not converge (perfect separation?)")]
    Separation,
    #[error("a Hajek denominator is zero")]
    EmptyGroup,
    #[error("Fisher matrix is numerically singular")]
    SingularFisher,
    #[error("influence of tuple {id} is unavailable: {source}")]
    InfluenceUnavailable {
        id: usize,
        #[source]
        source: Box<Error>,
    },

    // Pattern search.
    #[error("no categorical or binary attribute is eligible for patterns")]
    NoEligibleAttributes,
    #[error("cannot drop a predicate from the empty pattern")]
    EmptyPattern,

    // Oracles.
    #[error("instance has {n} tuples, above the exhaustive-search guard of {limit}")]
    InstanceTooLarge { n: usize, limit: usize },
    #[error("pattern space has {size} patterns, above the guard of {limit}")]
    PatternSpaceTooLarge { size: u128, limit: u128 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::MissingColumn(_) => "missing_column",
            Error::RaggedRow { .. } => "ragged_row",
            Error::UnparseableValue { .. } => "unparseable_value",
            Error::DuplicateAttribute(_) => "duplicate_attribute",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::UnknownAttribute(_) => "unknown_attribute",
            Error::AlreadyDeleted(_) => "already_deleted",
            Error::OutOfRange(_) => "out_of_range",
            Error::InvalidQuery(_) => "invalid_query",
            Error::InvalidPattern(_) => "invalid_pattern",
            Error::RankDeficient => "rank_deficient",
            Error::DegenerateGroups => "degenerate_groups",
            Error::SingularCapacitance => "singular_capacitance",
            Error::RankLost => "rank_lost",
            Error::NormTooLarge(_) => "norm_too_large",
            Error::Separation => "separation",
            Error::EmptyGroup => "empty_group",
            Error::SingularFisher => "singular_fisher",
            Error::InfluenceUnavailable { .. } => "influence_unavailable",
            Error::NoEligibleAttributes => "no_eligible_attributes",
            Error::EmptyPattern => "empty_pattern",
            Error::InstanceTooLarge { .. } => "instance_too_large",
            Error::PatternSpaceTooLarge { .. } => "pattern_space_too_large",
            Error::Config(_) => "config",
        }
    }
}

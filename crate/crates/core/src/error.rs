use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // ingestion
    #[error("missing column `{column}`")]
    MissingColumn { column: String },
    #[error("duplicate column `{column}` in header")]
    DuplicateColumn { column: String },
    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column `{column}`: `{value}` is not a binary class")]
    NonBinaryLabel {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    UnparseableNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column `{column}`: score {value} outside [0, 1]")]
    ScoreOutOfRange { row: usize, column: String, value: f64 },
    #[error("malformed delimited text: {0}")]
    Malformed(String),

    // features and binning
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("feature `{0}` is not numeric")]
    NotNumeric(String),
    #[error("invalid bin edges for `{feature}`: {reason}")]
    InvalidEdges { feature: String, reason: String },

    // subgroups
    #[error("unknown value `{value}` for feature `{feature}`")]
    UnknownValue { feature: String, value: String },
    #[error("at least one feature must be selected")]
    NoSelection,
    #[error("feature `{0}` appears in more than one predicate")]
    DuplicatePredicate(String),
    #[error("a subgroup needs at least one predicate")]
    EmptyPredicates,
    #[error("{combinations} combinations exceed the cap of {cap}")]
    ProductTooLarge { combinations: u128, cap: usize },
    #[error("subgroup `{subgroup}` belongs to dataset `{expected}`, not `{found}`")]
    StaleSubgroup {
        subgroup: String,
        expected: String,
        found: String,
    },
    #[error("mask has {found} entries but the dataset has {expected} rows")]
    MaskLength { expected: usize, found: usize },
    #[error("unknown subgroup `{0}`")]
    UnknownSubgroup(String),
    #[error("unknown group set `{0}`")]
    UnknownGroupSet(String),
    #[error("a group set needs at least one subgroup")]
    EmptySet,

    // metrics
    #[error("rate is undefined (zero denominator)")]
    UndefinedRate,
    #[error("need at least two groups with a defined rate, got {0}")]
    TooFewGroups(usize),
    #[error("`{0}` is both sensitive and legitimate")]
    OverlappingAttributes(String),
    #[error("no stratum has at least two groups of {min_stratum_size} rows")]
    NoQualifyingStrata { min_stratum_size: usize },

    // suggestions
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("k = {k} is outside 1..={n}")]
    KTooLarge { k: usize, n: usize },
    #[error("max_iter must be at least 1")]
    ZeroIterations,

    // decision tree
    #[error("tree document: {0}")]
    TreeParse(String),
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("node `{node}` answers into missing node `{target}`")]
    DanglingAnswer { node: String, target: String },
    #[error("leaf `{node}` references unknown definition `{definition}`")]
    UnknownDefinition { node: String, definition: String },
    #[error("node `{node}`: {reason}")]
    InvalidNode { node: String, reason: String },
    #[error("definition `{definition}`: {reason}")]
    InvalidDefinition { definition: String, reason: String },
    #[error("cycle through node `{0}`")]
    CycleDetected(String),
    #[error("multiple roots: {0:?}")]
    MultipleRoots(Vec<String>),
    #[error("node `{0}` is unreachable from the root")]
    UnreachableNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),

    // navigation and evaluation
    #[error("node `{0}` is not a question")]
    NotAQuestion(String),
    #[error("`{answer}` is not an answer of `{node}`")]
    UnknownAnswer { node: String, answer: String },
    #[error("node `{node}` is not the current frontier `{frontier}`; backtrack first")]
    OffPath { node: String, frontier: String },
    #[error("cannot backtrack {requested} steps, path has {available}")]
    BacktrackTooFar { requested: usize, available: usize },
    #[error("no fairness definition is selected")]
    NoDefinitionSelected,
    #[error("missing input `{0}`")]
    MissingInput(String),
    #[error("no active subgroups")]
    NoActiveSubgroups,
    #[error("session was created for dataset `{expected}`, not `{found}`")]
    DatasetMismatch { expected: String, found: String },
    #[error("session was created for tree `{expected}`, not `{found}`")]
    TreeMismatch { expected: String, found: String },

    // sessions and reports
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("corrupt session record: {0}")]
    CorruptRecord(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingColumn { .. } => "MissingColumn",
            Error::DuplicateColumn { .. } => "DuplicateColumn",
            Error::RaggedRow { .. } => "RaggedRow",
            Error::NonBinaryLabel { .. } => "NonBinaryLabel",
            Error::UnparseableNumeric { .. } => "UnparseableNumeric",
            Error::ScoreOutOfRange { .. } => "ScoreOutOfRange",
            Error::Malformed(_) => "Malformed",
            Error::UnknownFeature(_) => "UnknownFeature",
            Error::NotNumeric(_) => "NotNumeric",
            Error::InvalidEdges { .. } => "InvalidEdges",
            Error::UnknownValue { .. } => "UnknownValue",
            Error::NoSelection => "NoSelection",
            Error::DuplicatePredicate(_) => "DuplicatePredicate",
            Error::EmptyPredicates => "EmptyPredicates",
            Error::ProductTooLarge { .. } => "ProductTooLarge",
            Error::StaleSubgroup { .. } => "StaleSubgroup",
            Error::MaskLength { .. } => "MaskLength",
            Error::UnknownSubgroup(_) => "UnknownSubgroup",
            Error::UnknownGroupSet(_) => "UnknownGroupSet",
            Error::EmptySet => "EmptySet",
            Error::UndefinedRate => "UndefinedRate",
            Error::TooFewGroups(_) => "TooFewGroups",
            Error::OverlappingAttributes(_) => "OverlappingAttributes",
            Error::NoQualifyingStrata { .. } => "NoQualifyingStrata",
            Error::EmptyDataset => "EmptyDataset",
            Error::KTooLarge { .. } => "KTooLarge",
            Error::ZeroIterations => "ZeroIterations",
            Error::TreeParse(_) => "TreeParse",
            Error::DuplicateNode(_) => "DuplicateNode",
            Error::DanglingAnswer { .. } => "DanglingAnswer",
            Error::UnknownDefinition { .. } => "UnknownDefinition",
            Error::InvalidNode { .. } => "InvalidNode",
            Error::InvalidDefinition { .. } => "InvalidDefinition",
            Error::CycleDetected(_) => "CycleDetected",
            Error::MultipleRoots(_) => "MultipleRoots",
            Error::UnreachableNode(_) => "UnreachableNode",
            Error::UnknownNode(_) => "UnknownNode",
            Error::NotAQuestion(_) => "NotAQuestion",
            Error::UnknownAnswer { .. } => "UnknownAnswer",
            Error::OffPath { .. } => "OffPath",
            Error::BacktrackTooFar { .. } => "BacktrackTooFar",
            Error::NoDefinitionSelected => "NoDefinitionSelected",
            Error::MissingInput(_) => "MissingInput",
            Error::NoActiveSubgroups => "NoActiveSubgroups",
            Error::DatasetMismatch { .. } => "DatasetMismatch",
            Error::TreeMismatch { .. } => "TreeMismatch",
            Error::UnknownSession(_) => "UnknownSession",
            Error::CorruptRecord(_) => "CorruptRecord",
        }
    }
}

//! Fairness auditing for binary classifiers: per-subgroup confusion metrics,
//! parity checks, clustering-based subgroup suggestions, and a guided
//! decision tree for choosing a fairness definition, all recorded in an
//! exportable audit session.

pub mod compass;
pub mod data;
pub mod error;
pub mod metrics;
pub mod report;
pub mod session;
pub mod subgroup;
pub mod suggest;

pub use compass::{
    default_tree, describe_node, load_tree, path_to_definition, DecisionNode, DecisionTree, Evaluator,
    FairnessDefinition, NodeKind, RequiredInput,
};
pub use data::{
    bin_numeric, feature_distribution, load_dataset, BinStrategy, Class, Dataset, FeatureKind, FeatureSpec,
    Histogram, IngestConfig,
};
pub use error::{Error, Result};
pub use metrics::{
    confusion, demographic_parity, metric_deviation, metrics, parity_by_rate, rate_for_class,
    ConfusionCounts, MetricVector, ParityAssessment, RateKind, StratifiedParity,
};
pub use report::{export_session, import_record, import_session, AuditReport};
pub use session::{
    AuditSession, Clock, Evaluation, EvaluationInputs, EvaluationResult, Meta, RestoreMode, SessionEvent,
    SessionRecord, Stage, StageLogEntry,
};
pub use subgroup::{generate_subgroups, membership_mask, GroupSet, Predicate, Selection, Subgroup};
pub use suggest::{similar_subgroups, suggest_subgroups, SuggestConfig, SuggestedSubgroup};

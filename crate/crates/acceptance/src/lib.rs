//! One check per acceptance criterion. A check returns a one-line summary
//! when the criterion holds and a description of the first discrepancy when
//! it does not. Tolerances and limits live next to the checks that use them.

use std::path::PathBuf;
use std::time::Duration;

use faircompass_core::{BinStrategy, Class, IngestConfig};

pub mod facts;
pub mod golden;
pub mod invariants;
pub mod oracle_equivalence;
pub mod service;
pub mod tree_schema;
pub mod walkthrough;

pub type Outcome = Result<String, String>;

/// A named criterion with an optional wall-clock limit.
pub struct Criterion {
    pub name: &'static str,
    pub limit: Option<Duration>,
    pub check: fn() -> Outcome,
}

pub const CRITERIA: [Criterion; 7] = [
    Criterion {
        name: "oracle equivalence",
        limit: Some(Duration::from_secs(10)),
        check: oracle_equivalence::check,
    },
    Criterion {
        name: "adult dataset facts",
        limit: Some(Duration::from_secs(2)),
        check: facts::check,
    },
    Criterion {
        name: "walkthrough reproduction",
        limit: Some(Duration::from_secs(30)),
        check: walkthrough::check,
    },
    Criterion {
        name: "invariant suites",
        limit: None,
        check: invariants::check,
    },
    Criterion {
        name: "tree schema",
        limit: None,
        check: tree_schema::check,
    },
    Criterion {
        name: "cli golden report",
        limit: None,
        check: golden::check,
    },
    Criterion {
        name: "service persistence and idempotence",
        limit: None,
        check: service::check,
    },
];

/// Return early with a formatted failure unless the condition holds.
#[macro_export]
macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

pub fn workspace_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub const ADULT_CSV: &str = "fixtures/adult.csv";

/// Edges that give 40, 45 and 50 hours a bin each.
pub const HOURS_EDGES: [f64; 8] = [1.0, 40.0, 41.0, 45.0, 46.0, 50.0, 51.0, 99.0];

/// Ingest settings for the Adult fixture: class 1 is `<=50K`.
pub fn adult_config(hours_numeric: bool) -> IngestConfig {
    let config = IngestConfig::new("income", "prediction")
        .with_score("score")
        .with_alias("<=50K", Class::Positive)
        .with_alias(">50K", Class::Negative);
    if hours_numeric {
        config.with_numeric(["hours-per-week"]).with_bins(
            "hours-per-week",
            BinStrategy::Explicit {
                edges: HOURS_EDGES.to_vec(),
            },
        )
    } else {
        config
    }
}

pub fn adult_dataset(hours_numeric: bool) -> Result<faircompass_core::Dataset, String> {
    let file = std::fs::File::open(workspace_path(ADULT_CSV)).map_err(|e| format!("{ADULT_CSV}: {e}"))?;
    faircompass_core::load_dataset(std::io::BufReader::new(file), &adult_config(hours_numeric))
        .map_err(|e| format!("{ADULT_CSV}: {e}"))
}

pub(crate) fn err<E: std::fmt::Display>(context: &str) -> impl Fn(E) -> String + '_ {
    move |e| format!("{context}: {e}")
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use faircompass_core::{
    default_tree, export_session, load_dataset, load_tree, path_to_definition, suggest_subgroups,
    AuditSession, BinStrategy, Class, Clock, EvaluationInputs, IngestConfig, Meta, Selection, Stage,
    SuggestConfig,
};

use crate::error::ServiceError;

/// Session id used for command-line audits.
pub const CLI_SESSION_ID: &str = "cli";

#[derive(Debug, Parser)]
#[command(
    name = "faircompass",
    version,
    about = "Interactive fairness auditing of binary classifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP audit service.
    Serve {
        /// TOML configuration file; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Audit a predictions file against one fairness definition and write a report.
    Audit(AuditArgs),
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    /// CSV with features, ground truth and predictions.
    #[arg(long)]
    pub data: PathBuf,
    /// Ground-truth column.
    #[arg(long)]
    pub label: String,
    /// Prediction column.
    #[arg(long)]
    pub pred: String,
    /// Features to cross, comma separated. `feat:v1|v2` keeps only the listed values.
    #[arg(long)]
    pub groups: String,
    /// Fairness definition id from the decision tree.
    #[arg(long)]
    pub definition: String,
    /// Favourable class, 0 or 1.
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
    pub favourable: Option<u8>,
    /// Sensitive attribute.
    #[arg(long)]
    pub sensitive: Option<String>,
    /// Legitimate (explaining) attributes, comma separated.
    #[arg(long)]
    pub legitimate: Option<String>,
    /// Maximum tolerated gap between groups.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Seed for subgroup suggestions.
    #[arg(long, default_value_t = faircompass_core::suggest::DEFAULT_SEED)]
    pub seed: u64,
    /// Markdown report destination.
    #[arg(long)]
    pub out: PathBuf,
    /// Columns to parse as numbers, comma separated.
    #[arg(long)]
    pub numeric: Option<String>,
    /// Optional score column in [0, 1].
    #[arg(long)]
    pub score: Option<String>,
    /// Binning for a numeric column: `feat=N` for N equal-width bins or `feat=e0,e1,...` for explicit edges.
    #[arg(long = "bins")]
    pub bins: Vec<String>,
    /// Extra label spelling, `value:class`, e.g. `<=50K:1`.
    #[arg(long = "class-map")]
    pub class_map: Vec<String>,
    /// Smallest stratum, and smallest group within it, that conditional parity compares.
    #[arg(long)]
    pub min_stratum_size: Option<usize>,
    /// Decision tree document to use instead of the bundled one.
    #[arg(long)]
    pub tree: Option<PathBuf>,
    /// Cluster the data and record subgroup suggestions in the stage log.
    #[arg(long)]
    pub suggest: bool,
}

#[derive(Debug, Clone)]
pub struct AuditOutcome {
    pub satisfied: bool,
    pub summary: String,
    pub report: String,
}

fn bad(msg: impl Into<String>) -> ServiceError {
    ServiceError::BadRequest(msg.into())
}

fn split_list(list: &str) -> Vec<String> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

/// Parse `feat` or `feat:v1|v2` entries.
pub fn parse_groups(spec: &str) -> Result<Vec<Selection>, ServiceError> {
    let selections: Vec<Selection> = split_list(spec)
        .into_iter()
        .map(|entry| match entry.split_once(':') {
            None => Selection::all(entry),
            Some((feature, values)) => Selection::only(feature.trim(), values.split('|').map(str::trim)),
        })
        .collect();
    if selections.is_empty() {
        return Err(bad("--groups names no features"));
    }
    Ok(selections)
}

fn parse_bins(spec: &str) -> Result<(String, BinStrategy), ServiceError> {
    let (feature, rest) = spec
        .split_once('=')
        .ok_or_else(|| bad(format!("--bins `{spec}`: expected feat=N or feat=e0,e1,...")))?;
    let numbers: Vec<&str> = rest.split(',').map(str::trim).collect();
    let strategy = if let [count] = numbers.as_slice() {
        let bins = count
            .parse()
            .map_err(|_| bad(format!("--bins `{spec}`: `{count}` is not a bin count")))?;
        BinStrategy::EqualWidth { bins }
    } else {
        let edges = numbers
            .iter()
            .map(|e| {
                e.parse::<f64>()
                    .map_err(|_| bad(format!("--bins `{spec}`: `{e}` is not a number")))
            })
            .collect::<Result<_, _>>()?;
        BinStrategy::Explicit { edges }
    };
    Ok((feature.trim().to_string(), strategy))
}

fn parse_class_map(spec: &str) -> Result<(String, Class), ServiceError> {
    let (value, class) = spec
        .rsplit_once(':')
        .ok_or_else(|| bad(format!("--class-map `{spec}`: expected value:class")))?;
    let class = match class.trim() {
        "0" => Class::Negative,
        "1" => Class::Positive,
        other => {
            return Err(bad(format!(
                "--class-map `{spec}`: class `{other}` is not 0 or 1"
            )))
        }
    };
    Ok((value.to_string(), class))
}

impl AuditArgs {
    pub fn ingest_config(&self) -> Result<IngestConfig, ServiceError> {
        let mut config = IngestConfig::new(&self.label, &self.pred);
        if let Some(numeric) = &self.numeric {
            config = config.with_numeric(split_list(numeric));
        }
        if let Some(score) = &self.score {
            config = config.with_score(score);
        }
        for spec in &self.bins {
            let (feature, strategy) = parse_bins(spec)?;
            config = config.with_bins(feature, strategy);
        }
        for spec in &self.class_map {
            let (value, class) = parse_class_map(spec)?;
            config = config.with_alias(value, class);
        }
        Ok(config)
    }

    fn evaluation_inputs(&self) -> Result<EvaluationInputs, ServiceError> {
        Ok(EvaluationInputs {
            favourable_class: self.favourable.map(Class::try_from).transpose().map_err(bad)?,
            sensitive_attribute: self.sensitive.clone(),
            legitimate_attributes: self.legitimate.as_deref().map(split_list),
            rate_kind: None,
            threshold: self.threshold,
            min_stratum_size: self.min_stratum_size,
        })
    }
}

/// Run one scripted audit: explore the requested groups, walk the tree to
/// the definition, evaluate, and render the report.
pub fn audit(args: &AuditArgs, clock: Clock) -> Result<AuditOutcome, ServiceError> {
    let config = args.ingest_config()?;
    let file = std::fs::File::open(&args.data)
        .map_err(|e| bad(format!("cannot read {}: {e}", args.data.display())))?;
    let dataset = load_dataset(std::io::BufReader::new(file), &config)?;
    let tree = match &args.tree {
        Some(path) => load_tree(&std::fs::read_to_string(path)?)?,
        None => default_tree(),
    };
    let selections = parse_groups(&args.groups)?;
    let inputs = args.evaluation_inputs()?;
    let path = path_to_definition(&tree, &args.definition).ok_or_else(|| {
        bad(format!(
            "definition `{}` is not reachable in tree {}",
            args.definition, tree.version
        ))
    })?;

    let mut session = AuditSession::new(CLI_SESSION_ID, &dataset, &tree, clock);
    let cap = faircompass_core::subgroup::DEFAULT_MAX_COMBINATIONS;
    session.generate_groups(&dataset, &selections, cap, Meta::stage(Stage::Exploration))?;
    if args.suggest {
        let suggestions = suggest_subgroups(
            &dataset,
            &SuggestConfig {
                seed: args.seed,
                ..SuggestConfig::default()
            },
        )?;
        let names: Vec<_> = suggestions
            .iter()
            .map(|s| json!({"subgroup": s.subgroup.display_name, "notability": s.notability}))
            .collect();
        session.log_stage(
            Stage::Exploration,
            "suggestions",
            json!({"seed": args.seed, "suggestions": names}),
            None,
        )?;
    }
    for step in &path {
        session.navigate(&tree, &step.node_id, &step.answer, Meta::stage(Stage::Guidance))?;
    }
    let evaluation = session.evaluate(&dataset, &tree, &inputs, Meta::stage(Stage::InformedAnalysis))?;
    let satisfied = evaluation.result.satisfied();
    let summary = format!(
        "{}: {}",
        evaluation.definition_name,
        if satisfied { "satisfied" } else { "violated" }
    );
    let report = export_session(&session, &dataset, &tree)?.to_markdown();
    std::fs::write(&args.out, &report)
        .map_err(|e| ServiceError::Storage(format!("cannot write {}: {e}", args.out.display())))?;
    Ok(AuditOutcome {
        satisfied,
        summary,
        report,
    })
}

/// Process exit code for an audit: 0 satisfied, 1 violated, 2 error.
pub fn exit_code(result: &Result<AuditOutcome, ServiceError>) -> u8 {
    match result {
        Ok(outcome) if outcome.satisfied => 0,
        Ok(_) => 1,
        Err(_) => 2,
    }
}

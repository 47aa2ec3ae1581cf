//! Audit report export in JSON and markdown, and import back into a session.
//!
//! The markdown rendering ends with a fenced `json session-record` block
//! holding the full event record, so a report can be replayed.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::compass::{DecisionTree, FairnessDefinition};
use crate::data::{Dataset, FeatureKind};
use crate::error::{Error, Result};
use crate::metrics::{overall_metrics, subgroup_metrics, MetricVector, ParityAssessment, StratifiedParity};
use crate::session::{
    AuditSession, Clock, Evaluation, EvaluationResult, SessionRecord, Stage, StageLogEntry,
};
use crate::subgroup::{GroupSet, Subgroup};

pub const REPORT_FORMAT: &str = "faircompass-report/1";
const RECORD_FENCE: &str = "```json session-record";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub name: String,
    pub kind: FeatureKind,
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub id: String,
    pub rows: usize,
    pub label_column: String,
    pub prediction_column: String,
    pub features: Vec<FeatureSummary>,
    pub overall: MetricVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupReport {
    pub subgroup: Subgroup,
    pub metrics: MetricVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEntry {
    pub node_id: String,
    pub title: String,
    pub text: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionPath {
    pub steps: Vec<PathEntry>,
    pub end_node: String,
    pub end_title: String,
    /// `Title →(answer)→ Title ...`
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition: Option<FairnessDefinition>,
}

/// One pass of the exploration, guidance and informed-analysis loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopIteration {
    pub index: usize,
    /// Distinct stages in order of first appearance.
    pub stages: Vec<Stage>,
    pub first_seq: u64,
    pub last_seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub format: String,
    pub session_id: String,
    pub tree_version: String,
    pub dataset: DatasetSummary,
    pub active_subgroups: Vec<SubgroupReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pinned: Option<String>,
    pub saved_group_sets: Vec<GroupSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision_path: Option<DecisionPath>,
    pub evaluations: Vec<Evaluation>,
    pub iterations: Vec<LoopIteration>,
    pub stage_log: Vec<StageLogEntry>,
    pub record: SessionRecord,
}

/// Group stage-log entries into loop iterations. A new iteration begins at
/// an Exploration entry that follows a non-Exploration entry.
pub fn loop_iterations(log: &[StageLogEntry]) -> Vec<LoopIteration> {
    let mut out: Vec<LoopIteration> = Vec::new();
    let mut previous: Option<Stage> = None;
    for entry in log {
        let starts_new = match previous {
            None => true,
            Some(prev) => entry.stage == Stage::Exploration && prev != Stage::Exploration,
        };
        if starts_new {
            out.push(LoopIteration {
                index: out.len() + 1,
                stages: Vec::new(),
                first_seq: entry.seq,
                last_seq: entry.seq,
            });
        }
        let current = out.last_mut().expect("pushed above");
        if !current.stages.contains(&entry.stage) {
            current.stages.push(entry.stage);
        }
        current.last_seq = entry.seq;
        previous = Some(entry.stage);
    }
    out
}

pub fn export_session(session: &AuditSession, dataset: &Dataset, tree: &DecisionTree) -> Result<AuditReport> {
    if dataset.id() != session.header.dataset_id {
        return Err(Error::DatasetMismatch {
            expected: session.header.dataset_id.clone(),
            found: dataset.id().to_string(),
        });
    }
    if tree.version != session.header.tree_version {
        return Err(Error::TreeMismatch {
            expected: session.header.tree_version.clone(),
            found: tree.version.clone(),
        });
    }
    let features = dataset
        .features()
        .iter()
        .enumerate()
        .map(|(at, f)| FeatureSummary {
            name: f.name.clone(),
            kind: f.kind,
            levels: dataset.level_labels(at).len(),
        })
        .collect();
    let active_subgroups = session
        .active_subgroups()
        .into_iter()
        .map(|g| {
            Ok(SubgroupReport {
                metrics: subgroup_metrics(dataset, g)?,
                subgroup: g.clone(),
            })
        })
        .collect::<Result<_>>()?;

    let state = &session.state;
    let decision_path = if state.tree_path.is_empty() {
        None
    } else {
        let mut steps = Vec::with_capacity(state.tree_path.len());
        let mut summary = String::new();
        for step in &state.tree_path {
            let node = tree.node(&step.node_id)?;
            write!(summary, "{} →({})→ ", node.title(), step.answer).expect("string write");
            steps.push(PathEntry {
                node_id: node.id.clone(),
                title: node.title().to_string(),
                text: node.text.clone(),
                answer: step.answer.clone(),
            });
        }
        let end = tree.node(&state.frontier)?;
        summary.push_str(end.title());
        Some(DecisionPath {
            steps,
            end_node: end.id.clone(),
            end_title: end.title().to_string(),
            summary,
            definition: state
                .selected_definition
                .as_deref()
                .and_then(|d| tree.definition(d))
                .cloned(),
        })
    };

    Ok(AuditReport {
        format: REPORT_FORMAT.to_string(),
        session_id: session.header.id.clone(),
        tree_version: session.header.tree_version.clone(),
        dataset: DatasetSummary {
            id: dataset.id().to_string(),
            rows: dataset.row_count(),
            label_column: dataset.label_column().to_string(),
            prediction_column: dataset.prediction_column().to_string(),
            features,
            overall: overall_metrics(dataset),
        },
        active_subgroups,
        pinned: state.pinned.clone(),
        saved_group_sets: state.saved_group_sets.clone(),
        decision_path,
        evaluations: state.evaluations.clone(),
        iterations: loop_iterations(&state.stage_log),
        stage_log: state.stage_log.clone(),
        record: session.record(),
    })
}

fn rate(value: Option<f64>) -> String {
    value.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

fn escape(cell: &str) -> String {
    cell.replace('|', "\\|").replace('\n', " ")
}

impl AuditReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::CorruptRecord(e.to_string()))
    }

    pub fn to_markdown(&self) -> String {
        let mut md = String::new();
        self.write_markdown(&mut md).expect("string write");
        md
    }

    fn write_markdown(&self, md: &mut String) -> std::fmt::Result {
        let ds = &self.dataset;
        writeln!(md, "# Fairness audit report\n")?;
        writeln!(md, "- Session: `{}`", self.session_id)?;
        writeln!(md, "- Dataset: `{}` ({} rows)", ds.id, ds.rows)?;
        writeln!(md, "- Label column: `{}`", ds.label_column)?;
        writeln!(md, "- Prediction column: `{}`", ds.prediction_column)?;
        writeln!(md, "- Decision tree: `{}`\n", self.tree_version)?;

        writeln!(md, "## Dataset\n")?;
        writeln!(md, "| Feature | Kind | Levels |")?;
        writeln!(md, "|---|---|---:|")?;
        for f in &ds.features {
            let kind = match f.kind {
                FeatureKind::Categorical => "categorical",
                FeatureKind::Numeric => "numeric",
            };
            writeln!(md, "| {} | {kind} | {} |", escape(&f.name), f.levels)?;
        }
        writeln!(md)?;
        writeln!(md, "Overall metrics:\n")?;
        metric_header(md, "Population")?;
        metric_row(md, "All rows", &ds.overall)?;
        writeln!(md)?;

        if !self.active_subgroups.is_empty() {
            writeln!(md, "## Active subgroups\n")?;
            metric_header(md, "Subgroup")?;
            for g in &self.active_subgroups {
                let mut name = escape(&g.subgroup.display_name);
                if self.pinned.as_deref() == Some(g.subgroup.id.as_str()) {
                    name.push_str(" (pinned)");
                }
                metric_row(md, &name, &g.metrics)?;
            }
            writeln!(md)?;
        }

        if !self.saved_group_sets.is_empty() {
            writeln!(md, "## Saved group sets\n")?;
            for set in &self.saved_group_sets {
                let names: Vec<String> = set
                    .subgroup_ids
                    .iter()
                    .map(|id| self.subgroup_name(id).unwrap_or_else(|| id.clone()))
                    .collect();
                writeln!(md, "- **{}** (`{}`): {}", set.name, set.id, names.join("; "))?;
            }
            writeln!(md)?;
        }

        if let Some(path) = &self.decision_path {
            writeln!(md, "## Decision path\n")?;
            writeln!(md, "{}\n", path.summary)?;
            for (i, step) in path.steps.iter().enumerate() {
                writeln!(md, "{}. **{}**: answered *{}*", i + 1, step.title, step.answer)?;
                for line in step.text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
                    writeln!(md, "   > {}", line.trim())?;
                }
            }
            writeln!(md)?;
            if let Some(def) = &path.definition {
                writeln!(md, "### Selected definition: {}\n", def.name)?;
                writeln!(md, "{}\n", def.description.trim_end())?;
            }
        }

        if !self.evaluations.is_empty() {
            writeln!(md, "## Evaluations\n")?;
            for (i, ev) in self.evaluations.iter().enumerate() {
                let verdict = if ev.result.satisfied() {
                    "satisfied"
                } else {
                    "violated"
                };
                writeln!(md, "### {}. {}: {verdict}\n", i + 1, ev.definition_name)?;
                let inputs = serde_json::to_string(&ev.inputs).expect("inputs serialize");
                writeln!(md, "Event {}. Inputs: `{inputs}`\n", ev.seq)?;
                match &ev.result {
                    EvaluationResult::Parity(a) => parity_table(md, a)?,
                    EvaluationResult::Joint { assessments, .. } => {
                        for a in assessments {
                            parity_table(md, a)?;
                        }
                    }
                    EvaluationResult::Stratified(s) => stratified_tables(md, s)?,
                }
            }
        }

        if !self.iterations.is_empty() {
            writeln!(md, "## Analysis loop\n")?;
            let n = self.iterations.len();
            writeln!(md, "{n} iteration{}.\n", if n == 1 { "" } else { "s" })?;
            for it in &self.iterations {
                let stages: Vec<String> = it.stages.iter().map(Stage::to_string).collect();
                writeln!(
                    md,
                    "- Iteration {} (events {}-{}): {}",
                    it.index,
                    it.first_seq,
                    it.last_seq,
                    stages.join(" → ")
                )?;
            }
            writeln!(md)?;

            writeln!(md, "## Stage log\n")?;
            writeln!(md, "| # | Time | Stage | Action | Note |")?;
            writeln!(md, "|---:|---|---|---|---|")?;
            for e in &self.stage_log {
                writeln!(
                    md,
                    "| {} | {} | {} | {} | {} |",
                    e.seq,
                    e.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
                    e.stage,
                    escape(&e.action),
                    escape(e.note.as_deref().unwrap_or(""))
                )?;
            }
            writeln!(md)?;

            writeln!(md, "## Session record\n")?;
            writeln!(md, "{RECORD_FENCE}")?;
            writeln!(
                md,
                "{}",
                serde_json::to_string_pretty(&self.record).expect("record serializes")
            )?;
            writeln!(md, "```")?;
        }
        Ok(())
    }

    fn subgroup_name(&self, id: &str) -> Option<String> {
        self.record.events.iter().find_map(|e| {
            let json = serde_json::to_value(&e.change).ok()?;
            let groups = json
                .get("subgroups")
                .and_then(|v| v.as_array().cloned())
                .or_else(|| json.get("subgroup").map(|g| vec![g.clone()]))?;
            groups
                .iter()
                .find(|g| g.get("id").and_then(|v| v.as_str()) == Some(id))
                .and_then(|g| g.get("display_name")?.as_str().map(str::to_string))
        })
    }
}

fn metric_header(md: &mut String, first: &str) -> std::fmt::Result {
    writeln!(
        md,
        "| {first} | Size | Accuracy | Precision | Recall | FPR | FNR | Positive rate | Negative rate | Base rate |"
    )?;
    writeln!(md, "|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|")
}

fn metric_row(md: &mut String, name: &str, v: &MetricVector) -> std::fmt::Result {
    writeln!(
        md,
        "| {name} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
        v.size,
        rate(v.accuracy),
        rate(v.precision),
        rate(v.recall),
        rate(v.fpr),
        rate(v.fnr),
        rate(v.positive_rate),
        rate(v.negative_rate),
        rate(v.base_rate)
    )
}

fn parity_table(md: &mut String, a: &ParityAssessment) -> std::fmt::Result {
    writeln!(md, "| Subgroup | Size | {} |", a.rate_kind)?;
    writeln!(md, "|---|---:|---:|")?;
    for g in &a.per_group {
        writeln!(
            md,
            "| {} | {} | {} |",
            escape(&g.display_name),
            g.size,
            rate(g.rate)
        )?;
    }
    writeln!(
        md,
        "\nMax difference {:.4} (threshold {:.4}), min ratio {}.\n",
        a.max_abs_difference,
        a.threshold,
        rate(a.min_ratio)
    )
}

fn stratified_tables(md: &mut String, s: &StratifiedParity) -> std::fmt::Result {
    writeln!(
        md,
        "Sensitive attribute `{}`, legitimate attributes `{}`, favourable class {}, minimum group size {}.\n",
        s.sensitive_attribute,
        s.legitimate_attributes.join("`, `"),
        s.favourable_class,
        s.min_stratum_size
    )?;
    writeln!(
        md,
        "| Stratum | Size | Group | Rate | Max difference | Satisfied |"
    )?;
    writeln!(md, "|---|---:|---|---:|---:|---|")?;
    for stratum in &s.strata {
        let a = &stratum.assessment;
        for (i, g) in a.per_group.iter().enumerate() {
            let (name, size, diff, ok) = if i == 0 {
                (
                    escape(&stratum.display_name),
                    stratum.size.to_string(),
                    format!("{:.4}", a.max_abs_difference),
                    if a.satisfied { "yes" } else { "no" }.to_string(),
                )
            } else {
                Default::default()
            };
            writeln!(
                md,
                "| {name} | {size} | {} ({}) | {} | {diff} | {ok} |",
                escape(&g.display_name),
                g.size,
                rate(g.rate)
            )?;
        }
    }
    writeln!(md)?;
    if !s.excluded.is_empty() {
        writeln!(md, "Excluded strata:\n")?;
        for e in &s.excluded {
            writeln!(
                md,
                "- {} ({} rows): {}",
                escape(&e.display_name),
                e.size,
                e.reason
            )?;
        }
        writeln!(md)?;
    }
    let dropped: Vec<String> = s
        .strata
        .iter()
        .filter(|st| !st.dropped_groups.is_empty())
        .map(|st| format!("{}: {}", st.display_name, st.dropped_groups.join(", ")))
        .collect();
    if !dropped.is_empty() {
        writeln!(md, "Groups below the minimum size, left out of their stratum:\n")?;
        for d in dropped {
            writeln!(md, "- {}", escape(&d))?;
        }
        writeln!(md)?;
    }
    Ok(())
}

/// Extract the session record from a markdown or JSON report.
pub fn import_record(report: &str) -> Result<SessionRecord> {
    if report.trim_start().starts_with('{') {
        return Ok(AuditReport::from_json(report)?.record);
    }
    let start = report
        .find(RECORD_FENCE)
        .ok_or_else(|| Error::CorruptRecord("no session-record block".into()))?
        + RECORD_FENCE.len();
    let body = &report[start..];
    let end = body
        .find("\n```")
        .ok_or_else(|| Error::CorruptRecord("unterminated session-record block".into()))?;
    serde_json::from_str(&body[..end]).map_err(|e| Error::CorruptRecord(e.to_string()))
}

/// Rebuild a session from a report.
pub fn import_session(report: &str, clock: Clock) -> Result<AuditSession> {
    AuditSession::replay(import_record(report)?, clock)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compass::default_tree;
    use crate::data::{load_dataset, Class, IngestConfig};
    use crate::session::{EvaluationInputs, Meta};
    use crate::subgroup::Selection;
    use chrono::{TimeZone, Utc};

    fn dataset() -> Dataset {
        let mut text = String::from("sex,occ,y,yhat\n");
        for (sex, occ, n, zeros) in [
            ("M", "A", 10, 6),
            ("F", "A", 10, 3),
            ("M", "B", 4, 2),
            ("F", "B", 4, 2),
        ] {
            for i in 0..n {
                let yhat = if i < zeros { 0 } else { 1 };
                text.push_str(&format!("{sex},{occ},{},{yhat}\n", i % 2));
            }
        }
        load_dataset(text.as_bytes(), &IngestConfig::new("y", "yhat")).unwrap()
    }

    fn clock() -> Clock {
        Clock::Fixed(Utc.with_ymd_and_hms(2024, 5, 6, 7, 8, 9).unwrap())
    }

    fn scripted(ds: &Dataset) -> AuditSession {
        let tree = default_tree();
        let mut s = AuditSession::new("r1", ds, &tree, clock());
        s.generate_groups(ds, &[Selection::all("sex")], 100, Meta::default())
            .unwrap();
        for (node, answer) in [
            ("policy", "No"),
            ("equal_base_rates", "No, but should be"),
            ("explaining_variables", "Yes"),
        ] {
            s.navigate(&tree, node, answer, Meta::default()).unwrap();
        }
        s.generate_groups(
            ds,
            &[Selection::all("sex"), Selection::all("occ")],
            100,
            Meta::stage(Stage::Guidance),
        )
        .unwrap();
        let inputs = EvaluationInputs {
            favourable_class: Some(Class::Negative),
            sensitive_attribute: Some("sex".into()),
            min_stratum_size: Some(4),
            ..EvaluationInputs::default()
        };
        s.evaluate(ds, &tree, &inputs, Meta::default()).unwrap();
        s.log_stage(
            Stage::InformedAnalysis,
            "finding",
            serde_json::json!({}),
            Some("F lower".into()),
        )
        .unwrap();
        s.generate_groups(ds, &[Selection::all("occ")], 100, Meta::default())
            .unwrap();
        s.log_stage(Stage::InformedAnalysis, "finding", serde_json::json!({}), None)
            .unwrap();
        s
    }

    #[test]
    fn iterations_split_at_returns_to_exploration() {
        let ds = dataset();
        let report = export_session(&scripted(&ds), &ds, &default_tree()).unwrap();
        assert_eq!(report.iterations.len(), 2);
        assert_eq!(
            report.iterations[0].stages,
            [Stage::Exploration, Stage::Guidance, Stage::InformedAnalysis]
        );
        assert_eq!(report.iterations[1].first_seq, 8);
    }

    #[test]
    fn markdown_contains_path_and_round_trips() {
        let ds = dataset();
        let tree = default_tree();
        let session = scripted(&ds);
        let report = export_session(&session, &ds, &tree).unwrap();
        let md = report.to_markdown();
        assert!(md.contains(
            "Policy →(No)→ Equal base rates →(No, but should be)→ Explaining variables →(Yes)→ Conditional statistical parity"
        ));
        assert!(md.contains("### 1. Conditional statistical parity: violated"));
        assert!(md.contains("2 iterations."));
        assert_eq!(md, export_session(&session, &ds, &tree).unwrap().to_markdown());

        let back = import_session(&md, clock()).unwrap();
        assert_eq!(back, session);
        let back = import_session(&report.to_json(), clock()).unwrap();
        assert_eq!(back, session);
        assert_eq!(AuditReport::from_json(&report.to_json()).unwrap(), report);
    }

    #[test]
    fn empty_session_reports_dataset_only() {
        let ds = dataset();
        let tree = default_tree();
        let s = AuditSession::new("e", &ds, &tree, clock());
        let md = export_session(&s, &ds, &tree).unwrap().to_markdown();
        assert!(md.contains("## Dataset"));
        for absent in [
            "## Active subgroups",
            "## Decision path",
            "## Evaluations",
            "## Stage log",
            RECORD_FENCE,
        ] {
            assert!(!md.contains(absent), "{absent}");
        }
    }

    #[test]
    fn import_errors() {
        assert!(matches!(import_record("# nothing"), Err(Error::CorruptRecord(_))));
        assert!(matches!(
            import_record("```json session-record\n{\"header\": 1}\n```"),
            Err(Error::CorruptRecord(_))
        ));
    }
}

//! Audit sessions as append-only event logs.
//!
//! Every mutating command validates against the dataset and tree, emits one
//! [`SessionEvent`], and applies it. [`AuditSession::replay`] rebuilds the
//! same state from the events alone, without the dataset or tree.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compass::{DecisionTree, Evaluator, NodeKind, PathStep, RequiredInput};
use crate::data::{Class, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{
    conditional_statistical_parity, demographic_parity, parity_by_rate, ConditionalParityConfig,
    ParityAssessment, RateKind, StratifiedParity, DEFAULT_MIN_STRATUM_SIZE, DEFAULT_PARITY_THRESHOLD,
};
use crate::subgroup::{generate_subgroups, GroupSet, Predicate, Selection, Subgroup};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Exploration,
    Guidance,
    InformedAnalysis,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Exploration => "Exploration",
            Stage::Guidance => "Guidance",
            Stage::InformedAnalysis => "Informed Analysis",
        })
    }
}

/// Caller-supplied annotation of a command. A missing stage falls back to
/// the command's usual stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    #[serde(default)]
    pub stage: Option<Stage>,
    #[serde(default)]
    pub note: Option<String>,
}

impl Meta {
    pub fn stage(stage: Stage) -> Self {
        Self {
            stage: Some(stage),
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestoreMode {
    /// Append the set's subgroups that are not already active.
    #[default]
    Merge,
    /// Make the set the whole active list.
    Replace,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationInputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub favourable_class: Option<Class>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitive_attribute: Option<String>,
    /// Derived from the active subgroups' other features when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legitimate_attributes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_kind: Option<RateKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_stratum_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EvaluationResult {
    Parity(ParityAssessment),
    Stratified(StratifiedParity),
    /// Several rates that must all be at parity.
    Joint {
        assessments: Vec<ParityAssessment>,
        satisfied: bool,
    },
}

impl EvaluationResult {
    pub fn satisfied(&self) -> bool {
        match self {
            EvaluationResult::Parity(a) => a.satisfied,
            EvaluationResult::Stratified(s) => s.satisfied,
            EvaluationResult::Joint { satisfied, .. } => *satisfied,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub seq: u64,
    pub definition_id: String,
    pub definition_name: String,
    /// Inputs after defaults and derivations were filled in.
    pub inputs: EvaluationInputs,
    pub subgroup_ids: Vec<String>,
    pub result: EvaluationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Change {
    GroupsGenerated {
        selections: Vec<Selection>,
        subgroups: Vec<Subgroup>,
    },
    SubgroupAdded {
        subgroup: Subgroup,
    },
    GroupSetSaved {
        group_set: GroupSet,
    },
    GroupSetRestored {
        group_set_id: String,
        mode: RestoreMode,
    },
    SubgroupPinned {
        subgroup_id: Option<String>,
    },
    Navigated {
        node_id: String,
        answer: String,
        target: String,
        /// Definition selected when `target` is a leaf.
        definition_id: Option<String>,
    },
    Backtracked {
        steps: usize,
    },
    Evaluated {
        evaluation: Evaluation,
    },
    Note {
        action: String,
        payload: serde_json::Value,
    },
}

impl Change {
    pub fn action(&self) -> &str {
        match self {
            Change::GroupsGenerated { .. } => "groups_generated",
            Change::SubgroupAdded { .. } => "subgroup_added",
            Change::GroupSetSaved { .. } => "group_set_saved",
            Change::GroupSetRestored { .. } => "group_set_restored",
            Change::SubgroupPinned { .. } => "subgroup_pinned",
            Change::Navigated { .. } => "navigated",
            Change::Backtracked { .. } => "backtracked",
            Change::Evaluated { .. } => "evaluated",
            Change::Note { action, .. } => action,
        }
    }

    fn default_stage(&self) -> Stage {
        match self {
            Change::Navigated { .. } | Change::Backtracked { .. } | Change::Evaluated { .. } => {
                Stage::Guidance
            }
            _ => Stage::Exploration,
        }
    }

    fn payload(&self) -> serde_json::Value {
        match self {
            Change::Note { payload, .. } => payload.clone(),
            other => {
                let mut value = serde_json::to_value(other).expect("change serializes");
                if let Some(map) = value.as_object_mut() {
                    map.remove("type");
                }
                value
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub timestamp: DateTime<Utc>,
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub change: Change,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLogEntry {
    pub seq: u64,
    pub timestamp: DateTime<Utc>,
    pub stage: Stage,
    pub action: String,
    pub payload: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub id: String,
    pub dataset_id: String,
    pub tree_version: String,
    pub tree_root: String,
    pub created_at: DateTime<Utc>,
}

/// Header plus every event: enough to rebuild a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub header: SessionHeader,
    pub events: Vec<SessionEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    /// Every subgroup the session has seen, by id.
    pub subgroups: BTreeMap<String, Subgroup>,
    pub active: Vec<String>,
    pub saved_group_sets: Vec<GroupSet>,
    pub pinned: Option<String>,
    pub tree_path: Vec<PathStep>,
    /// Node awaiting an answer, or the selected leaf.
    pub frontier: String,
    pub selected_definition: Option<String>,
    pub stage_log: Vec<StageLogEntry>,
    pub evaluations: Vec<Evaluation>,
    pub events: Vec<SessionEvent>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Clock {
    #[default]
    System,
    Fixed(DateTime<Utc>),
}

impl Clock {
    pub fn now(&self) -> DateTime<Utc> {
        match self {
            Clock::System => Utc::now(),
            Clock::Fixed(t) => *t,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AuditSession {
    pub header: SessionHeader,
    pub state: SessionState,
    clock: Clock,
}

impl PartialEq for AuditSession {
    fn eq(&self, other: &Self) -> bool {
        self.header == other.header && self.state == other.state
    }
}

impl AuditSession {
    pub fn new(id: impl Into<String>, dataset: &Dataset, tree: &DecisionTree, clock: Clock) -> Self {
        let header = SessionHeader {
            id: id.into(),
            dataset_id: dataset.id().to_string(),
            tree_version: tree.version.clone(),
            tree_root: tree.root.clone(),
            created_at: clock.now(),
        };
        Self::from_header(header, clock)
    }

    fn from_header(header: SessionHeader, clock: Clock) -> Self {
        let state = SessionState {
            subgroups: BTreeMap::new(),
            active: Vec::new(),
            saved_group_sets: Vec::new(),
            pinned: None,
            tree_path: Vec::new(),
            frontier: header.tree_root.clone(),
            selected_definition: None,
            stage_log: Vec::new(),
            evaluations: Vec::new(),
            events: Vec::new(),
        };
        Self { header, state, clock }
    }

    /// Rebuild a session from its record.
    pub fn replay(record: SessionRecord, clock: Clock) -> Result<Self> {
        let mut session = Self::from_header(record.header, clock);
        for event in record.events {
            session.apply(event)?;
        }
        Ok(session)
    }

    pub fn record(&self) -> SessionRecord {
        SessionRecord {
            header: self.header.clone(),
            events: self.state.events.clone(),
        }
    }

    pub fn id(&self) -> &str {
        &self.header.id
    }

    pub fn set_clock(&mut self, clock: Clock) {
        self.clock = clock;
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.state.events
    }

    pub fn stage_log(&self) -> &[StageLogEntry] {
        &self.state.stage_log
    }

    pub fn evaluations(&self) -> &[Evaluation] {
        &self.state.evaluations
    }

    /// Active subgroups in display order.
    pub fn active_subgroups(&self) -> Vec<&Subgroup> {
        self.state
            .active
            .iter()
            .map(|id| &self.state.subgroups[id])
            .collect()
    }

    pub fn subgroup(&self, id: &str) -> Result<&Subgroup> {
        self.state
            .subgroups
            .get(id)
            .ok_or_else(|| Error::UnknownSubgroup(id.to_string()))
    }

    pub fn pinned(&self) -> Option<&Subgroup> {
        self.state.pinned.as_deref().map(|id| &self.state.subgroups[id])
    }

    pub fn selected_definition(&self) -> Option<&str> {
        self.state.selected_definition.as_deref()
    }

    /// Hex sha256 of the serialized header and state.
    pub fn state_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&self.header).expect("header serializes"));
        hasher.update(serde_json::to_vec(&self.state).expect("state serializes"));
        hex::encode(hasher.finalize())
    }

    fn check_dataset(&self, dataset: &Dataset) -> Result<()> {
        if dataset.id() != self.header.dataset_id {
            return Err(Error::DatasetMismatch {
                expected: self.header.dataset_id.clone(),
                found: dataset.id().to_string(),
            });
        }
        Ok(())
    }

    fn check_tree(&self, tree: &DecisionTree) -> Result<()> {
        if tree.version != self.header.tree_version {
            return Err(Error::TreeMismatch {
                expected: self.header.tree_version.clone(),
                found: tree.version.clone(),
            });
        }
        Ok(())
    }

    fn emit(&mut self, change: Change, meta: Meta) -> Result<&SessionEvent> {
        let event = SessionEvent {
            seq: self.state.events.len() as u64 + 1,
            timestamp: self.clock.now(),
            stage: meta.stage.unwrap_or_else(|| change.default_stage()),
            note: meta.note,
            change,
        };
        self.apply(event)?;
        Ok(self.state.events.last().expect("just applied"))
    }

    /// Apply one event. Fails with [`Error::CorruptRecord`] when the event
    /// does not fit the current state.
    pub fn apply(&mut self, event: SessionEvent) -> Result<()> {
        let corrupt = |msg: String| Error::CorruptRecord(format!("event {}: {msg}", event.seq));
        let expected = self.state.events.len() as u64 + 1;
        if event.seq != expected {
            return Err(corrupt(format!("expected sequence number {expected}")));
        }
        let state = &mut self.state;
        match &event.change {
            Change::GroupsGenerated { subgroups, .. } => {
                for g in subgroups {
                    if g.dataset_id != self.header.dataset_id {
                        return Err(corrupt(format!("subgroup {} is from another dataset", g.id)));
                    }
                }
                state.active.clear();
                for g in subgroups {
                    state.subgroups.insert(g.id.clone(), g.clone());
                    if !state.active.contains(&g.id) {
                        state.active.push(g.id.clone());
                    }
                }
            }
            Change::SubgroupAdded { subgroup } => {
                if subgroup.dataset_id != self.header.dataset_id {
                    return Err(corrupt(format!(
                        "subgroup {} is from another dataset",
                        subgroup.id
                    )));
                }
                state.subgroups.insert(subgroup.id.clone(), subgroup.clone());
                if !state.active.contains(&subgroup.id) {
                    state.active.push(subgroup.id.clone());
                }
            }
            Change::GroupSetSaved { group_set } => {
                if let Some(id) = group_set
                    .subgroup_ids
                    .iter()
                    .find(|id| !state.subgroups.contains_key(*id))
                {
                    return Err(corrupt(format!("unknown subgroup {id}")));
                }
                state.saved_group_sets.push(group_set.clone());
            }
            Change::GroupSetRestored { group_set_id, mode } => {
                let set = state
                    .saved_group_sets
                    .iter()
                    .find(|s| &s.id == group_set_id)
                    .ok_or_else(|| corrupt(format!("unknown group set {group_set_id}")))?;
                if *mode == RestoreMode::Replace {
                    state.active.clear();
                }
                for id in &set.subgroup_ids {
                    if !state.active.contains(id) {
                        state.active.push(id.clone());
                    }
                }
            }
            Change::SubgroupPinned { subgroup_id } => {
                if let Some(id) = subgroup_id {
                    if !state.active.contains(id) {
                        return Err(corrupt(format!("pinned subgroup {id} is not active")));
                    }
                }
                state.pinned = subgroup_id.clone();
            }
            Change::Navigated {
                node_id,
                answer,
                target,
                definition_id,
            } => {
                if node_id != &state.frontier {
                    return Err(corrupt(format!(
                        "answer at {node_id} but frontier is {}",
                        state.frontier
                    )));
                }
                state.tree_path.push(PathStep {
                    node_id: node_id.clone(),
                    answer: answer.clone(),
                });
                state.frontier = target.clone();
                state.selected_definition = definition_id.clone();
            }
            Change::Backtracked { steps } => {
                if *steps > state.tree_path.len() {
                    return Err(corrupt(format!("cannot backtrack {steps} steps")));
                }
                if *steps > 0 {
                    let keep = state.tree_path.len() - steps;
                    state.frontier = state.tree_path[keep].node_id.clone();
                    state.tree_path.truncate(keep);
                    state.selected_definition = None;
                }
            }
            Change::Evaluated { evaluation } => {
                if evaluation.seq != event.seq {
                    return Err(corrupt(
                        "evaluation sequence number differs from its event".into(),
                    ));
                }
                state.evaluations.push(evaluation.clone());
            }
            Change::Note { .. } => {}
        }
        if let Some(p) = &state.pinned {
            if !state.active.contains(p) {
                state.pinned = None;
            }
        }
        state.stage_log.push(StageLogEntry {
            seq: event.seq,
            timestamp: event.timestamp,
            stage: event.stage,
            action: event.change.action().to_string(),
            payload: event.change.payload(),
            note: event.note.clone(),
        });
        state.events.push(event);
        Ok(())
    }

    /// Replace the active subgroups with a generated product.
    pub fn generate_groups(
        &mut self,
        dataset: &Dataset,
        selections: &[Selection],
        max_combinations: usize,
        meta: Meta,
    ) -> Result<&[Subgroup]> {
        self.check_dataset(dataset)?;
        let subgroups = generate_subgroups(dataset, selections, max_combinations)?;
        self.emit(
            Change::GroupsGenerated {
                selections: selections.to_vec(),
                subgroups,
            },
            meta,
        )?;
        match &self.state.events.last().expect("just emitted").change {
            Change::GroupsGenerated { subgroups, .. } => Ok(subgroups),
            _ => unreachable!(),
        }
    }

    /// Add one hand-built subgroup to the active list.
    pub fn add_subgroup(
        &mut self,
        dataset: &Dataset,
        predicates: Vec<Predicate>,
        meta: Meta,
    ) -> Result<Subgroup> {
        self.check_dataset(dataset)?;
        let subgroup = Subgroup::new(dataset, predicates)?;
        self.emit(
            Change::SubgroupAdded {
                subgroup: subgroup.clone(),
            },
            meta,
        )?;
        Ok(subgroup)
    }

    /// Save the active subgroups under `name`. Names need not be unique.
    pub fn save_group_set(&mut self, name: impl Into<String>, meta: Meta) -> Result<GroupSet> {
        if self.state.active.is_empty() {
            return Err(Error::EmptySet);
        }
        let seq = self.state.events.len() as u64 + 1;
        let group_set = GroupSet {
            id: format!("gs-{seq}"),
            name: name.into(),
            subgroup_ids: self.state.active.clone(),
            created_at: self.clock.now(),
        };
        self.emit(
            Change::GroupSetSaved {
                group_set: group_set.clone(),
            },
            meta,
        )?;
        Ok(group_set)
    }

    pub fn restore_group_set(&mut self, group_set_id: &str, mode: RestoreMode, meta: Meta) -> Result<()> {
        if !self.state.saved_group_sets.iter().any(|s| s.id == group_set_id) {
            return Err(Error::UnknownGroupSet(group_set_id.to_string()));
        }
        self.emit(
            Change::GroupSetRestored {
                group_set_id: group_set_id.to_string(),
                mode,
            },
            meta,
        )?;
        Ok(())
    }

    /// Pin an active subgroup for comparison, or clear the pin with `None`.
    pub fn pin(&mut self, subgroup_id: Option<&str>, meta: Meta) -> Result<()> {
        if let Some(id) = subgroup_id {
            if !self.state.active.iter().any(|a| a == id) {
                return Err(Error::UnknownSubgroup(id.to_string()));
            }
        }
        self.emit(
            Change::SubgroupPinned {
                subgroup_id: subgroup_id.map(str::to_string),
            },
            meta,
        )?;
        Ok(())
    }

    /// Answer the frontier question. Returns the node reached.
    pub fn navigate(
        &mut self,
        tree: &DecisionTree,
        node_id: &str,
        answer: &str,
        meta: Meta,
    ) -> Result<String> {
        self.check_tree(tree)?;
        let node = tree.node(node_id)?;
        if node.kind != NodeKind::Question {
            return Err(Error::NotAQuestion(node_id.to_string()));
        }
        if node_id != self.state.frontier {
            return Err(Error::OffPath {
                node: node_id.to_string(),
                frontier: self.state.frontier.clone(),
            });
        }
        let target = &node
            .answer(answer)
            .ok_or_else(|| Error::UnknownAnswer {
                node: node_id.to_string(),
                answer: answer.to_string(),
            })?
            .target;
        let definition_id = tree.node(target)?.definition_id.clone();
        self.emit(
            Change::Navigated {
                node_id: node_id.to_string(),
                answer: answer.to_string(),
                target: target.clone(),
                definition_id,
            },
            meta,
        )?;
        Ok(target.clone())
    }

    /// Undo the last `steps` answers.
    pub fn backtrack(&mut self, steps: usize, meta: Meta) -> Result<()> {
        if steps > self.state.tree_path.len() {
            return Err(Error::BacktrackTooFar {
                requested: steps,
                available: self.state.tree_path.len(),
            });
        }
        self.emit(Change::Backtracked { steps }, meta)?;
        Ok(())
    }

    /// Run the selected definition on the active subgroups.
    pub fn evaluate(
        &mut self,
        dataset: &Dataset,
        tree: &DecisionTree,
        inputs: &EvaluationInputs,
        meta: Meta,
    ) -> Result<&Evaluation> {
        self.check_dataset(dataset)?;
        self.check_tree(tree)?;
        let definition_id = self
            .state
            .selected_definition
            .clone()
            .ok_or(Error::NoDefinitionSelected)?;
        let definition = tree
            .definition(&definition_id)
            .ok_or_else(|| Error::UnknownNode(definition_id.clone()))?;
        let active: Vec<Subgroup> = self.active_subgroups().into_iter().cloned().collect();
        if active.is_empty() {
            return Err(Error::NoActiveSubgroups);
        }

        let mut resolved = EvaluationInputs {
            threshold: Some(inputs.threshold.unwrap_or(DEFAULT_PARITY_THRESHOLD)),
            ..EvaluationInputs::default()
        };
        let threshold = resolved.threshold.expect("set above");
        let required = &definition.required_inputs;
        if required.contains(&RequiredInput::FavourableClass) {
            resolved.favourable_class = Some(
                inputs
                    .favourable_class
                    .ok_or_else(|| Error::MissingInput("favourable_class".into()))?,
            );
        }
        if required.contains(&RequiredInput::SensitiveAttribute) {
            resolved.sensitive_attribute = Some(
                inputs
                    .sensitive_attribute
                    .clone()
                    .ok_or_else(|| Error::MissingInput("sensitive_attribute".into()))?,
            );
        }
        if required.contains(&RequiredInput::RateKind) {
            resolved.rate_kind = Some(
                inputs
                    .rate_kind
                    .ok_or_else(|| Error::MissingInput("rate_kind".into()))?,
            );
        }
        if required.contains(&RequiredInput::LegitimateAttributes) {
            let legitimate = match &inputs.legitimate_attributes {
                Some(l) => l.clone(),
                None => derive_legitimate(&active, resolved.sensitive_attribute.as_deref()),
            };
            if legitimate.is_empty() {
                return Err(Error::MissingInput("legitimate_attributes".into()));
            }
            resolved.legitimate_attributes = Some(legitimate);
        }

        let result = match &definition.evaluator {
            Evaluator::DemographicParity => EvaluationResult::Parity(demographic_parity(
                dataset,
                &active,
                resolved.favourable_class.expect("required"),
                threshold,
            )?),
            Evaluator::RateParity { rates } => {
                let rates = if rates.is_empty() {
                    vec![resolved.rate_kind.expect("required")]
                } else {
                    rates.clone()
                };
                let mut assessments = rates
                    .iter()
                    .map(|&r| parity_by_rate(dataset, &active, r, threshold))
                    .collect::<Result<Vec<_>>>()?;
                if assessments.len() == 1 {
                    EvaluationResult::Parity(assessments.remove(0))
                } else {
                    let satisfied = assessments.iter().all(|a| a.satisfied);
                    EvaluationResult::Joint {
                        assessments,
                        satisfied,
                    }
                }
            }
            Evaluator::ConditionalStatisticalParity => {
                let min_stratum_size = inputs.min_stratum_size.unwrap_or(DEFAULT_MIN_STRATUM_SIZE);
                resolved.min_stratum_size = Some(min_stratum_size);
                let sensitive = resolved.sensitive_attribute.clone().expect("required");
                let legitimate = resolved.legitimate_attributes.clone().expect("required");
                let config = ConditionalParityConfig {
                    sensitive: selection_from_active(dataset, &active, &sensitive)?,
                    legitimate: legitimate
                        .iter()
                        .map(|f| selection_from_active(dataset, &active, f))
                        .collect::<Result<_>>()?,
                    favourable: resolved.favourable_class.expect("required"),
                    threshold,
                    min_stratum_size,
                };
                EvaluationResult::Stratified(conditional_statistical_parity(dataset, &config)?)
            }
        };

        let evaluation = Evaluation {
            seq: self.state.events.len() as u64 + 1,
            definition_id,
            definition_name: definition.name.clone(),
            inputs: resolved,
            subgroup_ids: active.iter().map(|g| g.id.clone()).collect(),
            result,
        };
        self.emit(Change::Evaluated { evaluation }, meta)?;
        Ok(self.state.evaluations.last().expect("just applied"))
    }

    /// Record a free-form stage entry.
    pub fn log_stage(
        &mut self,
        stage: Stage,
        action: impl Into<String>,
        payload: serde_json::Value,
        note: Option<String>,
    ) -> Result<&StageLogEntry> {
        self.emit(
            Change::Note {
                action: action.into(),
                payload,
            },
            Meta {
                stage: Some(stage),
                note,
            },
        )?;
        Ok(self.state.stage_log.last().expect("just applied"))
    }
}

/// Features used by the active subgroups, other than the sensitive one, in
/// first-seen order.
fn derive_legitimate(active: &[Subgroup], sensitive: Option<&str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for p in active.iter().flat_map(|g| &g.predicates) {
        if Some(p.feature.as_str()) != sensitive && !out.contains(&p.feature) {
            out.push(p.feature.clone());
        }
    }
    out
}

/// Restrict `feature` to the values the active subgroups select, or to every
/// value when no active subgroup mentions it.
fn selection_from_active(dataset: &Dataset, active: &[Subgroup], feature: &str) -> Result<Selection> {
    let mut values: Vec<String> = Vec::new();
    for p in active
        .iter()
        .flat_map(|g| &g.predicates)
        .filter(|p| p.feature == feature)
    {
        let label = p.value_label(dataset)?;
        if !values.contains(&label) {
            values.push(label);
        }
    }
    Ok(if values.is_empty() {
        Selection::all(feature)
    } else {
        Selection::only(feature, values)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compass::default_tree;
    use crate::data::{load_dataset, IngestConfig};
    use chrono::TimeZone;

    fn fixed() -> Clock {
        Clock::Fixed(Utc.with_ymd_and_hms(2024, 1, 2, 3, 4, 5).unwrap())
    }

    fn dataset() -> Dataset {
        let mut text = String::from("sex,occ,y,yhat\n");
        // M: favourable (0) rate 0.6 in A, F: 0.3 in A; both 0.5 in B.
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

    fn session(ds: &Dataset) -> AuditSession {
        AuditSession::new("s1", ds, &default_tree(), fixed())
    }

    #[test]
    fn every_command_logs_once() {
        let ds = dataset();
        let tree = default_tree();
        let mut s = session(&ds);
        s.generate_groups(&ds, &[Selection::all("sex")], 100, Meta::default())
            .unwrap();
        assert_eq!(s.stage_log().len(), 1);
        let male = s.active_subgroups()[0].id.clone();
        s.pin(Some(&male), Meta::default()).unwrap();
        s.save_group_set("sexes", Meta::default()).unwrap();
        s.navigate(&tree, "policy", "No", Meta::default()).unwrap();
        s.backtrack(1, Meta::default()).unwrap();
        s.log_stage(
            Stage::InformedAnalysis,
            "insight",
            serde_json::json!({"k": 1}),
            None,
        )
        .unwrap();
        let actions: Vec<&str> = s.stage_log().iter().map(|e| e.action.as_str()).collect();
        assert_eq!(
            actions,
            [
                "groups_generated",
                "subgroup_pinned",
                "group_set_saved",
                "navigated",
                "backtracked",
                "insight"
            ]
        );
        let seqs: Vec<u64> = s.stage_log().iter().map(|e| e.seq).collect();
        assert_eq!(seqs, [1, 2, 3, 4, 5, 6]);
        assert_eq!(s.stage_log()[3].stage, Stage::Guidance);
        assert_eq!(s.stage_log()[5].payload, serde_json::json!({"k": 1}));
    }

    #[test]
    fn failed_commands_do_not_log() {
        let ds = dataset();
        let tree = default_tree();
        let mut s = session(&ds);
        assert_eq!(
            s.save_group_set("x", Meta::default()).unwrap_err(),
            Error::EmptySet
        );
        assert_eq!(
            s.restore_group_set("gs-9", RestoreMode::Merge, Meta::default())
                .unwrap_err(),
            Error::UnknownGroupSet("gs-9".into())
        );
        assert!(matches!(
            s.navigate(&tree, "policy", "Maybe", Meta::default()),
            Err(Error::UnknownAnswer { .. })
        ));
        assert_eq!(
            s.navigate(&tree, "leaf_demographic_parity", "Yes", Meta::default())
                .unwrap_err(),
            Error::NotAQuestion("leaf_demographic_parity".into())
        );
        assert_eq!(
            s.navigate(&tree, "equal_base_rates", "No", Meta::default())
                .unwrap_err(),
            Error::OffPath {
                node: "equal_base_rates".into(),
                frontier: "policy".into()
            }
        );
        assert_eq!(
            s.backtrack(1, Meta::default()).unwrap_err(),
            Error::BacktrackTooFar {
                requested: 1,
                available: 0
            }
        );
        assert_eq!(
            s.evaluate(&ds, &tree, &EvaluationInputs::default(), Meta::default())
                .unwrap_err(),
            Error::NoDefinitionSelected
        );
        assert!(s.events().is_empty());
    }

    #[test]
    fn navigate_backtrack_is_a_stack() {
        let ds = dataset();
        let tree = default_tree();
        let mut s = session(&ds);
        s.navigate(&tree, "policy", "No", Meta::default()).unwrap();
        let before = (s.state.tree_path.clone(), s.state.frontier.clone());
        s.navigate(&tree, "equal_base_rates", "No, but should be", Meta::default())
            .unwrap();
        s.navigate(&tree, "explaining_variables", "Yes", Meta::default())
            .unwrap();
        assert_eq!(s.selected_definition(), Some("conditional_statistical_parity"));
        s.backtrack(2, Meta::default()).unwrap();
        assert_eq!((s.state.tree_path.clone(), s.state.frontier.clone()), before);
        assert_eq!(s.selected_definition(), None);
        s.navigate(&tree, "equal_base_rates", "No, but should be", Meta::default())
            .unwrap();
        s.navigate(&tree, "explaining_variables", "Yes", Meta::default())
            .unwrap();
        assert_eq!(s.selected_definition(), Some("conditional_statistical_parity"));
    }

    #[test]
    fn pin_must_be_active_and_is_cleared_on_regeneration() {
        let ds = dataset();
        let mut s = session(&ds);
        s.generate_groups(&ds, &[Selection::all("sex")], 100, Meta::default())
            .unwrap();
        let id = s.active_subgroups()[1].id.clone();
        s.pin(Some(&id), Meta::default()).unwrap();
        assert_eq!(s.pinned().unwrap().id, id);
        assert_eq!(
            s.pin(Some("sg-nope"), Meta::default()).unwrap_err(),
            Error::UnknownSubgroup("sg-nope".into())
        );
        s.generate_groups(&ds, &[Selection::all("occ")], 100, Meta::default())
            .unwrap();
        assert!(s.pinned().is_none());
    }

    #[test]
    fn group_sets_merge_or_replace() {
        let ds = dataset();
        let mut s = session(&ds);
        s.generate_groups(&ds, &[Selection::all("sex")], 100, Meta::default())
            .unwrap();
        let a = s.save_group_set("same", Meta::default()).unwrap();
        s.generate_groups(&ds, &[Selection::all("occ")], 100, Meta::default())
            .unwrap();
        let b = s.save_group_set("same", Meta::default()).unwrap();
        assert_ne!(a.id, b.id);
        s.restore_group_set(&a.id, RestoreMode::Merge, Meta::default())
            .unwrap();
        assert_eq!(s.active_subgroups().len(), 4);
        s.restore_group_set(&a.id, RestoreMode::Replace, Meta::default())
            .unwrap();
        let names: Vec<&str> = s
            .active_subgroups()
            .iter()
            .map(|g| g.display_name.as_str())
            .collect();
        assert_eq!(names, ["F", "M"]);
    }

    fn to_csp(s: &mut AuditSession, tree: &DecisionTree) {
        s.navigate(tree, "policy", "No", Meta::default()).unwrap();
        s.navigate(tree, "equal_base_rates", "No, but should be", Meta::default())
            .unwrap();
        s.navigate(tree, "explaining_variables", "Yes", Meta::default())
            .unwrap();
    }

    #[test]
    fn evaluate_csp_derives_legitimate_attributes() {
        let ds = dataset();
        let tree = default_tree();
        let mut s = session(&ds);
        s.generate_groups(
            &ds,
            &[Selection::all("sex"), Selection::all("occ")],
            100,
            Meta::default(),
        )
        .unwrap();
        to_csp(&mut s, &tree);
        let missing = EvaluationInputs {
            favourable_class: Some(Class::Negative),
            ..EvaluationInputs::default()
        };
        assert_eq!(
            s.evaluate(&ds, &tree, &missing, Meta::default()).unwrap_err(),
            Error::MissingInput("sensitive_attribute".into())
        );
        let inputs = EvaluationInputs {
            sensitive_attribute: Some("sex".into()),
            min_stratum_size: Some(4),
            ..missing
        };
        let ev = s.evaluate(&ds, &tree, &inputs, Meta::default()).unwrap().clone();
        assert_eq!(ev.inputs.legitimate_attributes, Some(vec!["occ".to_string()]));
        let EvaluationResult::Stratified(sp) = &ev.result else {
            panic!("expected stratified result")
        };
        assert_eq!(sp.strata.len(), 2);
        assert!((sp.strata[0].assessment.max_abs_difference - 0.3).abs() < 1e-12);
        assert!(!ev.result.satisfied());
        assert_eq!(s.stage_log().last().unwrap().stage, Stage::Guidance);
    }

    #[test]
    fn evaluate_rate_parity_and_joint() {
        let ds = dataset();
        let tree = default_tree();
        let mut s = session(&ds);
        s.generate_groups(&ds, &[Selection::all("sex")], 100, Meta::default())
            .unwrap();
        s.navigate(&tree, "policy", "No", Meta::default()).unwrap();
        s.navigate(&tree, "equal_base_rates", "Yes", Meta::default())
            .unwrap();
        s.navigate(&tree, "error_focus", "Both error types", Meta::default())
            .unwrap();
        let ev = s
            .evaluate(&ds, &tree, &EvaluationInputs::default(), Meta::default())
            .unwrap();
        let EvaluationResult::Joint { assessments, .. } = &ev.result else {
            panic!("expected joint result")
        };
        let kinds: Vec<RateKind> = assessments.iter().map(|a| a.rate_kind).collect();
        assert_eq!(kinds, [RateKind::Tpr, RateKind::Fpr]);
    }

    #[test]
    fn re_adding_an_active_group_keeps_one_copy() {
        let ds = dataset();
        let tree = default_tree();
        let mut s = session(&ds);
        s.add_subgroup(&ds, vec![Predicate::equals("sex", "M")], Meta::default())
            .unwrap();
        s.add_subgroup(&ds, vec![Predicate::equals("sex", "M")], Meta::default())
            .unwrap();
        assert_eq!(s.active_subgroups().len(), 1);
        assert_eq!(s.stage_log().len(), 2);
        s.navigate(&tree, "policy", "Yes", Meta::default()).unwrap();
        s.navigate(&tree, "explaining_variables", "No", Meta::default())
            .unwrap();
        let inputs = EvaluationInputs {
            favourable_class: Some(Class::Positive),
            ..EvaluationInputs::default()
        };
        assert_eq!(
            s.evaluate(&ds, &tree, &inputs, Meta::default()).unwrap_err(),
            Error::TooFewGroups(1)
        );
    }

    #[test]
    fn replay_rebuilds_equal_state() {
        let ds = dataset();
        let tree = default_tree();
        let mut s = session(&ds);
        s.generate_groups(
            &ds,
            &[Selection::all("sex"), Selection::all("occ")],
            100,
            Meta::default(),
        )
        .unwrap();
        s.save_group_set("all", Meta::default()).unwrap();
        to_csp(&mut s, &tree);
        let inputs = EvaluationInputs {
            favourable_class: Some(Class::Negative),
            sensitive_attribute: Some("sex".into()),
            min_stratum_size: Some(4),
            ..EvaluationInputs::default()
        };
        s.evaluate(
            &ds,
            &tree,
            &inputs,
            Meta::stage(Stage::InformedAnalysis).with_note("gap"),
        )
        .unwrap();
        let json = serde_json::to_string(&s.record()).unwrap();
        let back: SessionRecord = serde_json::from_str(&json).unwrap();
        let replayed = AuditSession::replay(back, Clock::System).unwrap();
        assert_eq!(replayed, s);
        assert_eq!(replayed.state_hash(), s.state_hash());
    }

    #[test]
    fn replay_rejects_gaps() {
        let ds = dataset();
        let mut s = session(&ds);
        s.generate_groups(&ds, &[Selection::all("sex")], 100, Meta::default())
            .unwrap();
        s.generate_groups(&ds, &[Selection::all("occ")], 100, Meta::default())
            .unwrap();
        let mut record = s.record();
        record.events.remove(0);
        assert!(matches!(
            AuditSession::replay(record, Clock::System),
            Err(Error::CorruptRecord(_))
        ));
    }

    #[test]
    fn commands_check_the_dataset() {
        let ds = dataset();
        let other = load_dataset("sex,y,yhat\nM,1,1\n".as_bytes(), &IngestConfig::new("y", "yhat")).unwrap();
        let mut s = session(&ds);
        assert!(matches!(
            s.generate_groups(&other, &[Selection::all("sex")], 100, Meta::default()),
            Err(Error::DatasetMismatch { .. })
        ));
    }
}

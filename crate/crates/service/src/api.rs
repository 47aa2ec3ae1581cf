//! Routes under `/api/v1`.
//!
//! Every mutating route maps to exactly one session command, so each one
//! appends exactly one stage-log entry. Read routes never touch session
//! state.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use axum::extract::{DefaultBodyLimit, FromRequest, FromRequestParts, Path, Query, Request, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use faircompass_core::compass::NodeDescription;
use faircompass_core::metrics::subgroup_metrics;
use faircompass_core::session::{SessionHeader, SessionState};
use faircompass_core::subgroup::GroupSet;
use faircompass_core::suggest::SimilarSubgroup;
use faircompass_core::{
    default_tree, describe_node, export_session, feature_distribution, load_dataset, load_tree,
    similar_subgroups, suggest_subgroups, AuditSession, Clock, Dataset, DecisionTree, Error as CoreError,
    Evaluation, EvaluationInputs, FeatureSpec, Histogram, IngestConfig, Meta, MetricVector, Predicate,
    RateKind, RestoreMode, Selection, Stage, StageLogEntry, Subgroup, SuggestConfig, SuggestedSubgroup,
};

use crate::config::ServiceConfig;
use crate::error::ServiceError;
use crate::store::{valid_id, Store};

type ApiResult<T> = Result<T, ServiceError>;

/// Shared service state: the loaded tree, the store, and in-memory caches
/// of datasets and sessions.
pub struct AppState {
    pub config: ServiceConfig,
    pub tree: Arc<DecisionTree>,
    store: Store,
    datasets: RwLock<HashMap<String, Arc<Dataset>>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<AuditSession>>>>,
}

fn lock(session: &Mutex<AuditSession>) -> MutexGuard<'_, AuditSession> {
    // Commands run on a copy that is swapped in only on success, so a
    // poisoned guard still holds consistent state.
    session.lock().unwrap_or_else(|e| e.into_inner())
}

impl AppState {
    /// Open the store and replay every stored session.
    pub fn open(config: ServiceConfig) -> ApiResult<Self> {
        config.validate()?;
        let tree = match &config.tree_path {
            Some(path) => load_tree(&std::fs::read_to_string(path)?)?,
            None => default_tree(),
        };
        let store = Store::open(&config.store_path)?;
        let mut sessions = HashMap::new();
        for record in store.load_sessions()? {
            let session = AuditSession::replay(record, Clock::System)?;
            sessions.insert(session.id().to_string(), Arc::new(Mutex::new(session)));
        }
        tracing::info!(sessions = sessions.len(), store = %store.root().display(), "store opened");
        Ok(Self {
            config,
            tree: Arc::new(tree),
            store,
            datasets: RwLock::new(HashMap::new()),
            sessions: RwLock::new(sessions),
        })
    }

    pub fn add_dataset(&self, csv: &str, config: &IngestConfig) -> ApiResult<Arc<Dataset>> {
        let cap = self.config.max_dataset_bytes;
        if csv.len() > cap {
            return Err(ServiceError::DatasetTooLarge { size: csv.len(), cap });
        }
        let dataset = load_dataset(csv.as_bytes(), config)?;
        let id = dataset.id().to_string();
        if let Some(cached) = self.datasets.read().unwrap().get(&id) {
            return Ok(cached.clone());
        }
        self.store.save_dataset(&id, csv, config)?;
        let dataset = Arc::new(dataset);
        self.datasets.write().unwrap().insert(id, dataset.clone());
        Ok(dataset)
    }

    /// A dataset by id, loading it from the store on first use.
    pub fn dataset(&self, id: &str) -> ApiResult<Arc<Dataset>> {
        if let Some(cached) = self.datasets.read().unwrap().get(id) {
            return Ok(cached.clone());
        }
        let (csv, config) = self
            .store
            .load_dataset(id)?
            .ok_or_else(|| ServiceError::UnknownDataset(id.to_string()))?;
        let dataset = load_dataset(csv.as_bytes(), &config)?;
        if dataset.id() != id {
            return Err(ServiceError::Storage(format!(
                "dataset {id} reloads as {}",
                dataset.id()
            )));
        }
        let dataset = Arc::new(dataset);
        self.datasets
            .write()
            .unwrap()
            .insert(id.to_string(), dataset.clone());
        Ok(dataset)
    }

    pub fn create_session(&self, id: Option<String>, dataset_id: &str) -> ApiResult<AuditSession> {
        let id = id.unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
        if !valid_id(&id) {
            return Err(ServiceError::BadRequest(format!(
                "session id `{id}` must be 1 to 64 letters, digits, `-` or `_`"
            )));
        }
        let dataset = self.dataset(dataset_id)?;
        let mut sessions = self.sessions.write().unwrap();
        if sessions.contains_key(&id) {
            return Err(ServiceError::SessionExists(id));
        }
        let session = AuditSession::new(id.clone(), &dataset, &self.tree, Clock::System);
        self.store.create_session(&session.header)?;
        sessions.insert(id, Arc::new(Mutex::new(session.clone())));
        Ok(session)
    }

    fn handle(&self, id: &str) -> ApiResult<Arc<Mutex<AuditSession>>> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| CoreError::UnknownSession(id.to_string()).into())
    }

    /// Run a read-only query against a session.
    pub fn read<T>(&self, id: &str, query: impl FnOnce(&AuditSession) -> ApiResult<T>) -> ApiResult<T> {
        let handle = self.handle(id)?;
        let session = lock(&handle);
        query(&session)
    }

    /// Run a command on a copy of the session, persist the events it
    /// emitted, then swap the copy in. Holding the session lock throughout
    /// serializes commands per session.
    pub fn mutate<T>(
        &self,
        id: &str,
        command: impl FnOnce(&mut AuditSession) -> ApiResult<T>,
    ) -> ApiResult<T> {
        let handle = self.handle(id)?;
        let mut session = lock(&handle);
        let mut draft = session.clone();
        let before = draft.events().len();
        let out = command(&mut draft)?;
        self.store.append_events(id, &draft.events()[before..])?;
        *session = draft;
        Ok(out)
    }

    pub fn snapshot(&self, id: &str) -> ApiResult<AuditSession> {
        self.read(id, |s| Ok(s.clone()))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().unwrap().keys().cloned().collect();
        ids.sort();
        ids
    }
}

/// JSON body extractor whose rejections use the service error format.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ServiceError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) if e.status() == StatusCode::PAYLOAD_TOO_LARGE => Err(ServiceError::PayloadTooLarge),
            Err(e) => Err(ServiceError::BadRequest(e.body_text())),
        }
    }
}

/// Query-string extractor whose rejections use the service error format.
pub struct Params<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequestParts<S> for Params<T> {
    type Rejection = ServiceError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        Query::<T>::from_request_parts(parts, state)
            .await
            .map(|Query(v)| Params(v))
            .map_err(|e| ServiceError::BadRequest(e.body_text()))
    }
}

type AppStateRef = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    // JSON string escaping can roughly double an upload; the dataset cap
    // proper is enforced on the decoded text.
    let body_limit = state
        .config
        .max_dataset_bytes
        .saturating_mul(2)
        .saturating_add(1 << 20);
    let api = Router::new()
        .route("/datasets", post(create_dataset))
        .route("/datasets/{id}", get(get_dataset))
        .route("/datasets/{id}/distribution/{feature}", get(distribution))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/groups", post(generate_groups))
        .route("/sessions/{id}/subgroups", post(add_subgroup))
        .route("/sessions/{id}/metrics", get(list_metrics))
        .route("/sessions/{id}/pin", post(pin))
        .route("/sessions/{id}/compare", get(compare))
        .route("/sessions/{id}/group-sets", post(save_group_set))
        .route("/sessions/{id}/group-sets/{set}/restore", post(restore_group_set))
        .route("/sessions/{id}/suggestions", get(suggestions))
        .route("/sessions/{id}/similar", get(similar))
        .route("/sessions/{id}/navigate", post(navigate))
        .route("/sessions/{id}/backtrack", post(backtrack))
        .route("/sessions/{id}/evaluate", post(evaluate))
        .route("/sessions/{id}/log", get(get_log).post(append_log))
        .route("/sessions/{id}/report", get(report))
        .route("/tree", get(get_tree))
        .route("/tree/nodes/{node}", get(get_node));
    Router::new()
        .nest("/api/v1", api)
        .layer(DefaultBodyLimit::max(body_limit))
        .with_state(state)
}

// datasets

#[derive(Debug, Deserialize)]
pub struct CreateDataset {
    pub csv: String,
    pub config: IngestConfig,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetView {
    pub dataset_id: String,
    pub rows: usize,
    pub label_column: String,
    pub prediction_column: String,
    pub features: Vec<FeatureSpec>,
}

impl From<&Dataset> for DatasetView {
    fn from(d: &Dataset) -> Self {
        Self {
            dataset_id: d.id().to_string(),
            rows: d.row_count(),
            label_column: d.label_column().to_string(),
            prediction_column: d.prediction_column().to_string(),
            features: d.features().to_vec(),
        }
    }
}

async fn create_dataset(
    State(app): AppStateRef,
    Body(req): Body<CreateDataset>,
) -> ApiResult<impl IntoResponse> {
    let dataset = app.add_dataset(&req.csv, &req.config)?;
    tracing::info!(
        dataset = dataset.id(),
        rows = dataset.row_count(),
        "dataset stored"
    );
    Ok((StatusCode::CREATED, Json(DatasetView::from(&*dataset))))
}

async fn get_dataset(State(app): AppStateRef, Path(id): Path<String>) -> ApiResult<Json<DatasetView>> {
    Ok(Json(DatasetView::from(&*app.dataset(&id)?)))
}

async fn distribution(
    State(app): AppStateRef,
    Path((id, feature)): Path<(String, String)>,
) -> ApiResult<Json<Histogram>> {
    let dataset = app.dataset(&id)?;
    Ok(Json(feature_distribution(&dataset, &feature)?))
}

// sessions

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    pub dataset_id: String,
    #[serde(default)]
    pub id: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub header: SessionHeader,
    pub state: SessionState,
    pub state_hash: String,
}

impl From<&AuditSession> for SessionView {
    fn from(s: &AuditSession) -> Self {
        Self {
            header: s.header.clone(),
            state: s.state.clone(),
            state_hash: s.state_hash(),
        }
    }
}

async fn create_session(
    State(app): AppStateRef,
    Body(req): Body<CreateSession>,
) -> ApiResult<impl IntoResponse> {
    let session = app.create_session(req.id, &req.dataset_id)?;
    tracing::info!(session = session.id(), dataset = %req.dataset_id, "session created");
    Ok((StatusCode::CREATED, Json(SessionView::from(&session))))
}

async fn get_session(State(app): AppStateRef, Path(id): Path<String>) -> ApiResult<Json<SessionView>> {
    app.read(&id, |s| Ok(Json(SessionView::from(s))))
}

#[derive(Debug, Deserialize)]
pub struct GenerateGroups {
    pub selections: Vec<Selection>,
    #[serde(default)]
    pub max_combinations: Option<usize>,
    #[serde(flatten)]
    pub meta: Meta,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubgroupList {
    pub subgroups: Vec<Subgroup>,
}

async fn generate_groups(
    State(app): AppStateRef,
    Path(id): Path<String>,
    Body(req): Body<GenerateGroups>,
) -> ApiResult<Json<SubgroupList>> {
    let cap = req
        .max_combinations
        .unwrap_or(app.config.defaults.max_combinations);
    app.mutate(&id, |s| {
        let dataset = app.dataset(&s.header.dataset_id)?;
        let subgroups = s
            .generate_groups(&dataset, &req.selections, cap, req.meta)?
            .to_vec();
        Ok(Json(SubgroupList { subgroups }))
    })
}

#[derive(Debug, Deserialize)]
pub struct AddSubgroup {
    pub predicates: Vec<Predicate>,
    #[serde(flatten)]
    pub meta: Meta,
}

async fn add_subgroup(
    State(app): AppStateRef,
    Path(id): Path<String>,
    Body(req): Body<AddSubgroup>,
) -> ApiResult<Json<Subgroup>> {
    app.mutate(&id, |s| {
        let dataset = app.dataset(&s.header.dataset_id)?;
        Ok(Json(s.add_subgroup(&dataset, req.predicates, req.meta)?))
    })
}

fn parse_rates(list: Option<&str>) -> ApiResult<Vec<RateKind>> {
    match list {
        None | Some("") => Ok(RateKind::ALL.to_vec()),
        Some(list) => list
            .split(',')
            .map(|r| r.parse().map_err(ServiceError::BadRequest))
            .collect(),
    }
}

fn select_rates(v: &MetricVector, rates: &[RateKind]) -> BTreeMap<String, Option<f64>> {
    rates.iter().map(|r| (r.as_str().to_string(), r.of(v))).collect()
}

#[derive(Debug, Deserialize)]
pub struct MetricsQuery {
    /// Comma-separated rate kinds; all when absent.
    #[serde(default)]
    pub rates: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SubgroupMetrics {
    pub subgroup: Subgroup,
    pub metrics: MetricVector,
    /// The requested rates only.
    pub rates: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MetricsView {
    pub overall: MetricVector,
    pub overall_rates: BTreeMap<String, Option<f64>>,
    pub subgroups: Vec<SubgroupMetrics>,
}

fn subgroup_entry(dataset: &Dataset, subgroup: &Subgroup, rates: &[RateKind]) -> ApiResult<SubgroupMetrics> {
    let metrics = subgroup_metrics(dataset, subgroup)?;
    Ok(SubgroupMetrics {
        subgroup: subgroup.clone(),
        rates: select_rates(&metrics, rates),
        metrics,
    })
}

async fn list_metrics(
    State(app): AppStateRef,
    Path(id): Path<String>,
    Params(q): Params<MetricsQuery>,
) -> ApiResult<Json<MetricsView>> {
    let rates = parse_rates(q.rates.as_deref())?;
    app.read(&id, |s| {
        let dataset = app.dataset(&s.header.dataset_id)?;
        let overall = faircompass_core::metrics::overall_metrics(&dataset);
        let subgroups = s
            .active_subgroups()
            .into_iter()
            .map(|g| subgroup_entry(&dataset, g, &rates))
            .collect::<ApiResult<_>>()?;
        Ok(Json(MetricsView {
            overall_rates: select_rates(&overall, &rates),
            overall,
            subgroups,
        }))
    })
}

#[derive(Debug, Deserialize)]
pub struct PinRequest {
    /// `null` clears the pin.
    #[serde(default)]
    pub subgroup_id: Option<String>,
    #[serde(flatten)]
    pub meta: Meta,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PinView {
    pub pinned: Option<String>,
}

async fn pin(
    State(app): AppStateRef,
    Path(id): Path<String>,
    Body(req): Body<PinRequest>,
) -> ApiResult<Json<PinView>> {
    app.mutate(&id, |s| {
        s.pin(req.subgroup_id.as_deref(), req.meta)?;
        Ok(Json(PinView {
            pinned: s.state.pinned.clone(),
        }))
    })
}

#[derive(Debug, Deserialize)]
pub struct CompareQuery {
    pub hovered: String,
    /// Defaults to the session's pinned subgroup.
    #[serde(default)]
    pub pinned: Option<String>,
    #[serde(default)]
    pub rates: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Comparison {
    pub pinned: SubgroupMetrics,
    pub hovered: SubgroupMetrics,
    /// Hovered minus pinned, per requested rate.
    pub difference: BTreeMap<String, Option<f64>>,
}

async fn compare(
    State(app): AppStateRef,
    Path(id): Path<String>,
    Params(q): Params<CompareQuery>,
) -> ApiResult<Json<Comparison>> {
    let rates = parse_rates(q.rates.as_deref())?;
    app.read(&id, |s| {
        let dataset = app.dataset(&s.header.dataset_id)?;
        let pinned_id = match q.pinned.as_deref().or(s.state.pinned.as_deref()) {
            Some(p) => p,
            None => {
                return Err(ServiceError::BadRequest(
                    "no pinned subgroup to compare against".into(),
                ))
            }
        };
        let pinned = subgroup_entry(&dataset, s.subgroup(pinned_id)?, &rates)?;
        let hovered = subgroup_entry(&dataset, s.subgroup(&q.hovered)?, &rates)?;
        let difference = rates
            .iter()
            .map(|r| {
                let d = match (r.of(&hovered.metrics), r.of(&pinned.metrics)) {
                    (Some(h), Some(p)) => Some(h - p),
                    _ => None,
                };
                (r.as_str().to_string(), d)
            })
            .collect();
        Ok(Json(Comparison {
            pinned,
            hovered,
            difference,
        }))
    })
}

#[derive(Debug, Deserialize)]
pub struct SaveGroupSet {
    pub name: String,
    #[serde(flatten)]
    pub meta: Meta,
}

async fn save_group_set(
    State(app): AppStateRef,
    Path(id): Path<String>,
    Body(req): Body<SaveGroupSet>,
) -> ApiResult<impl IntoResponse> {
    app.mutate(&id, |s| {
        let set: GroupSet = s.save_group_set(req.name, req.meta)?;
        Ok((StatusCode::CREATED, Json(set)))
    })
}

#[derive(Debug, Default, Deserialize)]
pub struct RestoreRequest {
    #[serde(default)]
    pub mode: RestoreMode,
    #[serde(flatten)]
    pub meta: Meta,
}

async fn restore_group_set(
    State(app): AppStateRef,
    Path((id, set)): Path<(String, String)>,
    Body(req): Body<RestoreRequest>,
) -> ApiResult<Json<SubgroupList>> {
    app.mutate(&id, |s| {
        s.restore_group_set(&set, req.mode, req.meta)?;
        Ok(Json(SubgroupList {
            subgroups: s.active_subgroups().into_iter().cloned().collect(),
        }))
    })
}

#[derive(Debug, Deserialize)]
pub struct SuggestQuery {
    #[serde(default)]
    pub rate: Option<String>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SuggestionsView {
    /// The configuration actually used, including the seed.
    pub config: SuggestConfig,
    pub suggestions: Vec<SuggestedSubgroup>,
}

async fn suggestions(
    State(app): AppStateRef,
    Path(id): Path<String>,
    Params(q): Params<SuggestQuery>,
) -> ApiResult<Json<SuggestionsView>> {
    let d = &app.config.defaults;
    let config = SuggestConfig {
        ranking_rate: match q.rate {
            Some(r) => r.parse().map_err(ServiceError::BadRequest)?,
            None => SuggestConfig::default().ranking_rate,
        },
        k: q.k.unwrap_or(d.k),
        seed: q.seed.unwrap_or(d.seed),
        dominance_threshold: d.dominance_threshold,
        max_iter: d.max_iter,
    };
    app.read(&id, |s| {
        let dataset = app.dataset(&s.header.dataset_id)?;
        let suggestions = suggest_subgroups(&dataset, &config)?;
        Ok(Json(SuggestionsView {
            config: config.clone(),
            suggestions,
        }))
    })
}

#[derive(Debug, Deserialize)]
pub struct SimilarQuery {
    pub target: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SimilarView {
    pub target: Subgroup,
    pub similar: Vec<SimilarSubgroup>,
}

async fn similar(
    State(app): AppStateRef,
    Path(id): Path<String>,
    Params(q): Params<SimilarQuery>,
) -> ApiResult<Json<SimilarView>> {
    app.read(&id, |s| {
        let dataset = app.dataset(&s.header.dataset_id)?;
        let target = s.subgroup(&q.target)?.clone();
        let candidates: Vec<Subgroup> = s.active_subgroups().into_iter().cloned().collect();
        let similar = similar_subgroups(&dataset, &target, &candidates)?;
        Ok(Json(SimilarView { target, similar }))
    })
}

// decision tree

async fn get_tree(State(app): AppStateRef) -> Json<Value> {
    let nodes: Vec<NodeDescription> = app
        .tree
        .iter_nodes()
        .map(|n| describe_node(&app.tree, &n.id).expect("node from the tree"))
        .collect();
    Json(serde_json::json!({
        "version": app.tree.version,
        "root": app.tree.root,
        "nodes": nodes,
        "definitions": app.tree.definitions.values().collect::<Vec<_>>(),
    }))
}

async fn get_node(State(app): AppStateRef, Path(node): Path<String>) -> ApiResult<Json<NodeDescription>> {
    Ok(Json(describe_node(&app.tree, &node)?))
}

#[derive(Debug, Deserialize)]
pub struct NavigateRequest {
    pub node_id: String,
    pub answer: String,
    #[serde(flatten)]
    pub meta: Meta,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TreePosition {
    pub frontier: NodeDescription,
    pub tree_path: Vec<faircompass_core::compass::PathStep>,
    pub selected_definition: Option<String>,
}

fn position(app: &AppState, s: &AuditSession) -> ApiResult<TreePosition> {
    Ok(TreePosition {
        frontier: describe_node(&app.tree, &s.state.frontier)?,
        tree_path: s.state.tree_path.clone(),
        selected_definition: s.state.selected_definition.clone(),
    })
}

async fn navigate(
    State(app): AppStateRef,
    Path(id): Path<String>,
    Body(req): Body<NavigateRequest>,
) -> ApiResult<Json<TreePosition>> {
    app.mutate(&id, |s| {
        s.navigate(&app.tree, &req.node_id, &req.answer, req.meta)?;
        Ok(Json(position(&app, s)?))
    })
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
pub struct BacktrackRequest {
    #[serde(default = "one")]
    pub steps: usize,
    #[serde(flatten)]
    pub meta: Meta,
}

async fn backtrack(
    State(app): AppStateRef,
    Path(id): Path<String>,
    Body(req): Body<BacktrackRequest>,
) -> ApiResult<Json<TreePosition>> {
    app.mutate(&id, |s| {
        s.backtrack(req.steps, req.meta)?;
        Ok(Json(position(&app, s)?))
    })
}

#[derive(Debug, Deserialize)]
pub struct EvaluateRequest {
    #[serde(flatten)]
    pub inputs: EvaluationInputs,
    #[serde(flatten)]
    pub meta: Meta,
}

async fn evaluate(
    State(app): AppStateRef,
    Path(id): Path<String>,
    Body(req): Body<EvaluateRequest>,
) -> ApiResult<Json<Evaluation>> {
    let mut inputs = req.inputs;
    inputs.threshold = inputs.threshold.or(Some(app.config.defaults.threshold));
    inputs.min_stratum_size = inputs
        .min_stratum_size
        .or(Some(app.config.defaults.min_stratum_size));
    app.mutate(&id, |s| {
        let dataset = app.dataset(&s.header.dataset_id)?;
        Ok(Json(s.evaluate(&dataset, &app.tree, &inputs, req.meta)?.clone()))
    })
}

// stage log and report

#[derive(Debug, Deserialize)]
pub struct LogRequest {
    pub stage: Stage,
    pub action: String,
    #[serde(default)]
    pub payload: Value,
    #[serde(default)]
    pub note: Option<String>,
}

async fn append_log(
    State(app): AppStateRef,
    Path(id): Path<String>,
    Body(req): Body<LogRequest>,
) -> ApiResult<impl IntoResponse> {
    app.mutate(&id, |s| {
        let entry = s.log_stage(req.stage, req.action, req.payload, req.note)?.clone();
        Ok((StatusCode::CREATED, Json(entry)))
    })
}

async fn get_log(State(app): AppStateRef, Path(id): Path<String>) -> ApiResult<Json<Vec<StageLogEntry>>> {
    app.read(&id, |s| Ok(Json(s.stage_log().to_vec())))
}

#[derive(Debug, Deserialize)]
pub struct ReportQuery {
    #[serde(default)]
    pub format: Option<String>,
}

async fn report(
    State(app): AppStateRef,
    Path(id): Path<String>,
    Params(q): Params<ReportQuery>,
) -> ApiResult<Response> {
    app.read(&id, |s| {
        let dataset = app.dataset(&s.header.dataset_id)?;
        let report = export_session(s, &dataset, &app.tree)?;
        match q.format.as_deref().unwrap_or("markdown") {
            "markdown" | "md" => Ok((
                [(header::CONTENT_TYPE, "text/markdown; charset=utf-8")],
                report.to_markdown(),
            )
                .into_response()),
            "json" => Ok(([(header::CONTENT_TYPE, "application/json")], report.to_json()).into_response()),
            other => Err(ServiceError::BadRequest(format!(
                "unknown report format `{other}`"
            ))),
        }
    })
}

/// Bind the configured address and serve until interrupted.
pub async fn serve(config: ServiceConfig) -> ApiResult<()> {
    let listen = config.listen.clone();
    let state = Arc::new(AppState::open(config)?);
    let listener = tokio::net::TcpListener::bind(&listen).await?;
    tracing::info!(address = %listen, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

//! HTTP API over one immutable data snapshot and checkpoint.
//!
//! | route | |
//! |---|---|
//! | `GET /api/years` | every year with its two temperatures |
//! | `POST /api/generate` | run an [`ApiQuery`] |
//! | `GET /api/model` | checkpoint metadata |
//! | `GET /api/midi?query=<json>` | the MIDI file for an [`ApiQuery`] |

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use crate::corpus::{DurationToken, Event, PitchToken};
use crate::engine::{self, LoadedData, LoadedModel};
use crate::export::{to_midi, DEFAULT_TEMPO_BPM};
use crate::generation::{
    default_seed, GenerationError, GenerationQuery, GenerationResult, Temperatures, DEFAULT_MXL, DEFAULT_MXX,
};
use crate::training::StopReason;

/// Loaded state; either part may be missing, in which case the endpoints
/// that need it answer 503.
#[derive(Clone, Default)]
pub struct AppState {
    pub data: Option<Arc<LoadedData>>,
    pub model: Option<Arc<LoadedModel>>,
}

impl AppState {
    pub fn new(data: Option<LoadedData>, model: Option<LoadedModel>) -> Self {
        Self { data: data.map(Arc::new), model: model.map(Arc::new) }
    }

    /// Load what is available, logging whatever is not.
    pub fn load(data_dir: &Path, checkpoint: &Path) -> Self {
        let data = LoadedData::load(data_dir).map_err(|e| log::warn!("{e}")).ok();
        let model = LoadedModel::load(checkpoint, Some(&data_dir.join(engine::VOCAB_FILE)))
            .map_err(|e| log::warn!("{e}"))
            .ok();
        Self::new(data, model)
    }
}

/// Request body of `POST /api/generate`. `sql` comes from the checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApiQuery {
    pub year: i32,
    /// Parallel pitch and duration lists; absent means the default A4 seed.
    #[serde(default)]
    pub seed: Option<ApiSeed>,
    #[serde(default)]
    pub mxx: Option<usize>,
    #[serde(default)]
    pub mxl: Option<usize>,
    /// Drawn by the server when absent and echoed in the response.
    #[serde(default)]
    pub rng_seed: Option<u64>,
    #[serde(default)]
    pub pitch_temperature: Option<f64>,
    #[serde(default)]
    pub duration_temperature: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApiSeed {
    pub pitches: Vec<String>,
    pub durations: Vec<ApiDuration>,
}

/// A quarter length given as a JSON number or a string such as `"1/3"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ApiDuration {
    Number(f64),
    Text(String),
}

impl ApiQuery {
    pub fn to_query(&self, sql: usize, rng_seed: u64) -> Result<GenerationQuery, String> {
        let seed = match &self.seed {
            None => default_seed(),
            Some(s) => {
                if s.pitches.len() != s.durations.len() {
                    return Err(format!(
                        "seed has {} pitches but {} durations",
                        s.pitches.len(),
                        s.durations.len()
                    ));
                }
                s.pitches
                    .iter()
                    .zip(&s.durations)
                    .map(|(p, d)| {
                        let pitch: PitchToken = p.parse().map_err(|e| format!("{e}"))?;
                        let duration: DurationToken = match d {
                            ApiDuration::Number(v) => v.to_string().parse(),
                            ApiDuration::Text(t) => t.parse(),
                        }
                        .map_err(|e| format!("{e}"))?;
                        Ok(Event::new(pitch, duration))
                    })
                    .collect::<Result<Vec<_>, String>>()?
            }
        };
        let query = GenerationQuery {
            year: self.year,
            seed,
            mxx: self.mxx.unwrap_or(DEFAULT_MXX),
            mxl: self.mxl.unwrap_or(DEFAULT_MXL),
            sql,
            rng_seed,
            pitch_temperature: self.pitch_temperature,
            duration_temperature: self.duration_temperature,
        };
        query.validate().map_err(|e| e.to_string())?;
        Ok(query)
    }

    pub fn from_query(q: &GenerationQuery) -> Self {
        Self {
            year: q.year,
            seed: Some(ApiSeed {
                pitches: q.seed.iter().map(|e| e.pitch.to_string()).collect(),
                durations: q.seed.iter().map(|e| ApiDuration::Text(e.duration.to_string())).collect(),
            }),
            mxx: Some(q.mxx),
            mxl: Some(q.mxl),
            rng_seed: Some(q.rng_seed),
            pitch_temperature: q.pitch_temperature,
            duration_temperature: q.duration_temperature,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct YearEntry {
    pub year: i32,
    pub pitch_temperature: f64,
    pub duration_temperature: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ApiEvent {
    pub pitch: String,
    pub duration: String,
    pub quarter_length: f64,
    pub midi: Option<i32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub query: ApiQuery,
    pub sql: usize,
    pub temperatures: Temperatures,
    pub melody: Vec<ApiEvent>,
    pub seed_len: usize,
    pub attention: Vec<Vec<f64>>,
    pub pitch_labels: Vec<String>,
    pub pitch_candidates: Vec<Vec<f64>>,
    pub duration_labels: Vec<String>,
    pub duration_candidates: Vec<Vec<f64>>,
    pub midi_url: String,
    pub checkpoint_hash: String,
    pub snapshot_hash: String,
    pub tempo_bpm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HistorySummary {
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    pub stopped_epoch: usize,
    pub stop_reason: StopReason,
    pub initial_validation_loss: f64,
    pub train_windows: usize,
    pub validation_windows: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelInfo {
    pub hidden: usize,
    pub pitch_embed: usize,
    pub duration_embed: usize,
    pub pitch_vocab: usize,
    pub duration_vocab: usize,
    pub sql: usize,
    pub parameters: usize,
    pub checkpoint_hash: String,
    pub vocab_hash: String,
    pub history: HistorySummary,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into() }
    }

    fn unavailable(what: &str) -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, format!("{what} is not loaded"))
    }
}

impl From<GenerationError> for ApiError {
    fn from(e: GenerationError) -> Self {
        let status = match &e {
            GenerationError::UnknownYear { .. } => StatusCode::NOT_FOUND,
            GenerationError::InvalidQuery(_) | GenerationError::OutOfVocabulary { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/years", get(years))
        .route("/api/generate", post(generate))
        .route("/api/model", get(model_info))
        .route("/api/midi", get(midi))
        .with_state(state);
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(CorsLayer::permissive())
}

/// Bind and serve until Ctrl-C.
pub async fn serve(state: AppState, static_dir: Option<PathBuf>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn six_decimals(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

async fn years(State(state): State<AppState>) -> Result<Json<Vec<YearEntry>>, ApiError> {
    let data = state.data.ok_or_else(|| ApiError::unavailable("temperature data"))?;
    Ok(Json(
        data.vectors
            .years
            .iter()
            .map(|(year, t)| YearEntry {
                year: *year,
                pitch_temperature: six_decimals(t.pitch),
                duration_temperature: six_decimals(t.duration),
            })
            .collect(),
    ))
}

fn loaded(state: &AppState) -> Result<(Arc<LoadedData>, Arc<LoadedModel>), ApiError> {
    let data = state.data.clone().ok_or_else(|| ApiError::unavailable("temperature data"))?;
    let model = state.model.clone().ok_or_else(|| ApiError::unavailable("model"))?;
    Ok((data, model))
}

fn parse_api_query(body: &[u8]) -> Result<ApiQuery, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("invalid query: {e}")))
}

async fn run(state: &AppState, api: ApiQuery) -> Result<(GenerationResult, Arc<LoadedData>, Arc<LoadedModel>), ApiError> {
    let (data, model) = loaded(state)?;
    // JavaScript clients keep integers exact only below 2^53
    let rng_seed = api.rng_seed.unwrap_or_else(|| u64::from(rand::random::<u32>()));
    let query = api.to_query(model.sql(), rng_seed).map_err(|m| ApiError::new(StatusCode::BAD_REQUEST, m))?;
    let (d, m) = (data.clone(), model.clone());
    let result = tokio::task::spawn_blocking(move || engine::run_query(&query, &m, &d))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok((result, data, model))
}

async fn generate(State(state): State<AppState>, body: Bytes) -> Result<Json<GenerateResponse>, ApiError> {
    let api = parse_api_query(&body)?;
    let (result, data, model) = run(&state, api).await?;
    let echo = ApiQuery::from_query(&result.query);
    let query_json = serde_json::to_string(&echo).expect("query serializes");
    let midi_url = format!(
        "/api/midi?{}",
        serde_urlencoded::to_string([("query", query_json.as_str())]).expect("urlencoding a string pair")
    );
    let vocab = model.vocab();
    Ok(Json(GenerateResponse {
        query: echo,
        sql: result.query.sql,
        temperatures: result.temperatures,
        melody: result
            .melody
            .events
            .iter()
            .map(|e| ApiEvent {
                pitch: e.pitch.to_string(),
                duration: e.duration.to_string(),
                quarter_length: e.duration.as_f64(),
                midi: e.pitch.midi(),
            })
            .collect(),
        seed_len: result.seed_len,
        attention: result.attention,
        pitch_labels: vocab.pitch_labels(),
        pitch_candidates: result.pitch_candidates,
        duration_labels: vocab.duration_labels(),
        duration_candidates: result.duration_candidates,
        midi_url,
        checkpoint_hash: model.checkpoint_hash.clone(),
        snapshot_hash: data.snapshot_hash.clone(),
        tempo_bpm: DEFAULT_TEMPO_BPM,
    }))
}

async fn midi(State(state): State<AppState>, Query(params): Query<HashMap<String, String>>) -> Result<Response, ApiError> {
    let text = params
        .get("query")
        .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "missing `query` parameter"))?;
    let api = parse_api_query(text.as_bytes())?;
    let (result, _, _) = run(&state, api).await?;
    let bytes = to_midi(&result.melody, DEFAULT_TEMPO_BPM)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let disposition = format!("attachment; filename=\"{}_{}.mid\"", result.query.year, result.query.rng_seed);
    Ok(([(header::CONTENT_TYPE, "audio/midi".to_string()), (header::CONTENT_DISPOSITION, disposition)], bytes)
        .into_response())
}

async fn model_info(State(state): State<AppState>) -> Result<Json<ModelInfo>, ApiError> {
    let model = state.model.ok_or_else(|| ApiError::unavailable("model"))?;
    let c = &model.checkpoint;
    let h = &c.history;
    Ok(Json(ModelInfo {
        hidden: c.params.dims.hidden,
        pitch_embed: c.params.dims.pitch_embed,
        duration_embed: c.params.dims.duration_embed,
        pitch_vocab: c.vocab.pitch_len(),
        duration_vocab: c.vocab.duration_len(),
        sql: c.config.sql,
        parameters: c.params.parameter_count(),
        checkpoint_hash: model.checkpoint_hash.clone(),
        vocab_hash: c.vocab_hash(),
        history: HistorySummary {
            best_epoch: h.best_epoch,
            best_validation_loss: h.best_validation_loss,
            stopped_epoch: h.stopped_epoch,
            stop_reason: h.stop_reason,
            initial_validation_loss: h.initial_validation_loss,
            train_windows: h.train_windows,
            validation_windows: h.validation_windows,
        },
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::climate::{TemperatureVectors, YearTemperatures};
    use crate::corpus::{windowize, Melody, Vocabulary};
    use crate::training::{train, Checkpoint, TrainConfig};
    use axum::body::Body;
    use axum::http::Request;
    use http_body_util::BodyExt;
    use std::collections::BTreeMap;
    use tower::ServiceExt;

    fn fixture() -> (LoadedData, LoadedModel) {
        let notes = ["A4", "C5", "E5", "R", "G4", "A4", "E5", "C5"];
        let durs = ["1", "1/2", "1/2", "1", "2", "1", "1/2", "1"];
        let melody = Melody::new("m", notes.iter().zip(durs).map(|(p, d)| Event::parse(p, d).unwrap()).collect());
        let corpus = vec![melody];
        let vocab = Vocabulary::build(&corpus).unwrap();
        let config = TrainConfig {
            hidden: 6,
            pitch_embed: 3,
            duration_embed: 2,
            sql: 4,
            max_epochs: 2,
            validation_fraction: 0.25,
            ..Default::default()
        };
        let windows = windowize(&corpus, &vocab, config.sql).unwrap();
        let outcome = train(&windows, &vocab, &config).unwrap();
        let checkpoint = Checkpoint { params: outcome.params, config, vocab, history: outcome.history };
        let years = (1876..=2021)
            .map(|y| {
                let x = f64::from(y - 1876) / 145.0;
                (y, YearTemperatures { pitch: x * 0.5, duration: x })
            })
            .collect::<BTreeMap<_, _>>();
        let vectors = TemperatureVectors { reference_year: 1876, years };
        (LoadedData::new(vectors), LoadedModel::new(checkpoint))
    }

    fn app() -> Router {
        let (data, model) = fixture();
        router(AppState::new(Some(data), Some(model)), None)
    }

    async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
        let resp = app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        (status, body)
    }

    fn post(body: &str) -> Request<Body> {
        Request::post("/api/generate")
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(body.to_string()))
            .unwrap()
    }

    fn get_req(uri: &str) -> Request<Body> {
        Request::get(uri).body(Body::empty()).unwrap()
    }

    #[tokio::test]
    async fn years_endpoint() {
        let app = app();
        let (status, body) = call(&app, get_req("/api/years")).await;
        assert_eq!(status, StatusCode::OK);
        let years: Vec<YearEntry> = serde_json::from_slice(&body).unwrap();
        assert_eq!(years.len(), 146);
        assert_eq!(years[0].year, 1876);
        assert_eq!(years[0].pitch_temperature, 0.0);
        assert_eq!(years[145].duration_temperature, 1.0);
        assert!(years.windows(2).all(|w| w[0].year < w[1].year));
    }

    #[tokio::test]
    async fn generate_is_deterministic_and_shaped() {
        let app = app();
        let body = r#"{"year": 2021, "seed": {"pitches": [], "durations": []}, "rng_seed": 7}"#;
        let (s1, b1) = call(&app, post(body)).await;
        let (s2, b2) = call(&app, post(body)).await;
        assert_eq!(s1, StatusCode::OK, "{}", String::from_utf8_lossy(&b1));
        assert_eq!(s2, StatusCode::OK);
        let r1: GenerateResponse = serde_json::from_slice(&b1).unwrap();
        let r2: GenerateResponse = serde_json::from_slice(&b2).unwrap();
        assert_eq!(serde_json::to_string(&r1.melody).unwrap(), serde_json::to_string(&r2.melody).unwrap());
        assert_eq!(r1.melody.len(), 16);
        assert_eq!(r1.seed_len, 0);
        assert_eq!(r1.attention.len(), 16);
        assert!(r1.attention.iter().all(|row| row.len() == r1.sql && row.len() == 4));
        for row in r1.attention.iter().chain(&r1.pitch_candidates).chain(&r1.duration_candidates) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert_eq!(r1.pitch_candidates[0].len(), r1.pitch_labels.len());
        assert_eq!(r1.query.rng_seed, Some(7));
        assert!(r1.midi_url.starts_with("/api/midi?query="));
    }

    #[tokio::test]
    async fn matches_the_shared_engine_path() {
        let (data, model) = fixture();
        let app = router(AppState::new(Some(data.clone()), Some(model.clone())), None);
        let (_, body) = call(&app, post(r#"{"year": 1950, "rng_seed": 3, "mxx": 5}"#)).await;
        let resp: GenerateResponse = serde_json::from_slice(&body).unwrap();
        let query = GenerationQuery { year: 1950, rng_seed: 3, mxx: 5, sql: 4, ..Default::default() };
        let direct = engine::run_query(&query, &model, &data).unwrap();
        let pitches: Vec<String> = direct.melody.events.iter().map(|e| e.pitch.to_string()).collect();
        assert_eq!(resp.melody.iter().map(|e| e.pitch.clone()).collect::<Vec<_>>(), pitches);
        assert_eq!(resp.attention, direct.attention);
    }

    #[tokio::test]
    async fn server_drawn_seed_is_echoed() {
        let app = app();
        let (_, body) = call(&app, post(r#"{"year": 2000}"#)).await;
        let resp: GenerateResponse = serde_json::from_slice(&body).unwrap();
        let seed = resp.query.rng_seed.unwrap();
        assert!(seed <= u64::from(u32::MAX));
        let replay = format!(r#"{{"year": 2000, "rng_seed": {seed}}}"#);
        let (_, again) = call(&app, post(&replay)).await;
        let again: GenerateResponse = serde_json::from_slice(&again).unwrap();
        assert_eq!(serde_json::to_string(&resp.melody).unwrap(), serde_json::to_string(&again.melody).unwrap());
    }

    #[tokio::test]
    async fn request_errors() {
        let app = app();
        for (body, status) in [
            (r#"{"year": 2021, "sql": 8}"#, StatusCode::BAD_REQUEST),
            (r#"{"year": 2021, "bogus": 1}"#, StatusCode::BAD_REQUEST),
            ("not json", StatusCode::BAD_REQUEST),
            (r#"{"year": 2021, "seed": {"pitches": ["A4"], "durations": []}}"#, StatusCode::BAD_REQUEST),
            (r#"{"year": 2021, "seed": {"pitches": ["B9"], "durations": [1]}}"#, StatusCode::BAD_REQUEST),
            (r#"{"year": 2021, "pitch_temperature": 2.0}"#, StatusCode::BAD_REQUEST),
            (r#"{"year": 1850}"#, StatusCode::NOT_FOUND),
        ] {
            let (s, b) = call(&app, post(body)).await;
            assert_eq!(s, status, "{body}");
            let err: serde_json::Value = serde_json::from_slice(&b).unwrap();
            assert!(err["error"].is_string());
        }
    }

    #[tokio::test]
    async fn unloaded_state_is_unavailable() {
        let app = router(AppState::default(), None);
        for req in [get_req("/api/years"), get_req("/api/model"), post(r#"{"year": 2021}"#)] {
            let (s, _) = call(&app, req).await;
            assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
        }
    }

    #[tokio::test]
    async fn model_metadata() {
        let app = app();
        let (s, body) = call(&app, get_req("/api/model")).await;
        assert_eq!(s, StatusCode::OK);
        let info: ModelInfo = serde_json::from_slice(&body).unwrap();
        assert_eq!(info.hidden, 6);
        assert_eq!(info.sql, 4);
        assert!(info.history.best_epoch <= 2);
        let raw: serde_json::Value = serde_json::from_slice(&body).unwrap();
        assert!(raw["history"]["best_epoch"].is_u64());
    }

    #[tokio::test]
    async fn midi_download_follows_the_link() {
        let app = app();
        let (_, body) = call(&app, post(r#"{"year": 1990, "rng_seed": 11}"#)).await;
        let resp: GenerateResponse = serde_json::from_slice(&body).unwrap();
        let r = app.clone().oneshot(get_req(&resp.midi_url)).await.unwrap();
        assert_eq!(r.status(), StatusCode::OK);
        assert_eq!(r.headers()[header::CONTENT_TYPE], "audio/midi");
        let bytes = r.into_body().collect().await.unwrap().to_bytes();
        assert_eq!(&bytes[..4], b"MThd");
        let (s, _) = call(&app, get_req("/api/midi")).await;
        assert_eq!(s, StatusCode::BAD_REQUEST);
    }
}

//! HTTP API over a built audiobook library: search, voices, previews and
//! full-book jobs. See `docs/http-api.md` for the contract.

mod config;
mod index;
mod jobs;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, LazyLock};

use audiobook_core::script::{escape_text, format_pitch, format_rate, SSML_NAMESPACE};
use audiobook_core::synthesis::{
    encode_wav, enroll_voice, write_atomic, SynthesisBackend, SynthesisError, SynthesisRequest, VoiceOrigin,
    VoiceProfile,
};
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use regex::Regex;
use serde::Deserialize;
use tokio::net::TcpListener;
use tokio::sync::{oneshot, Semaphore};
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use config::ServiceConfig;
pub use index::{BookDetail, BookIndex, BookSummary, ChapterInfo};
pub use jobs::{
    build_artifact, job_script, new_job_id, JobQueue, JobRecord, JobStatus, JobStore, RenderSettings, StatusChange,
    VoiceChoice,
    MAX_DEDICATION_CHARS,
};

pub const MAX_ENROLL_BYTES: usize = 20 * 1024 * 1024;
pub const DEFAULT_SEARCH_LIMIT: usize = 20;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> ApiError {
        ApiError {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn not_found(what: &str, id: &str) -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, format!("{what} {id:?} not found"))
}

/// Status for a synthesis failure: bad requests are the caller's fault,
/// anything from the backend is a bad gateway.
fn synthesis_status(e: &SynthesisError) -> StatusCode {
    match e {
        SynthesisError::InvalidRequest(_) => StatusCode::BAD_REQUEST,
        SynthesisError::AudioTooShort { .. } | SynthesisError::BadAudio(_) => StatusCode::UNPROCESSABLE_ENTITY,
        _ => StatusCode::BAD_GATEWAY,
    }
}

pub struct AppState {
    pub config: ServiceConfig,
    pub index: BookIndex,
    pub store: JobStore,
    pub queue: JobQueue,
    pub backend: Arc<dyn SynthesisBackend>,
    previews: Semaphore,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Result<AppState, String> {
        config.validate()?;
        let index = BookIndex::load(&config.library)?;
        let store = JobStore::open(&config.data_dir).map_err(|e| e.to_string())?;
        std::fs::create_dir_all(voices_dir(&config)).map_err(|e| e.to_string())?;
        let backend: Arc<dyn SynthesisBackend> = Arc::from(config.backend.build().map_err(|e| e.to_string())?);
        Ok(AppState {
            index,
            store,
            queue: JobQueue::new(config.queue_cap),
            backend,
            previews: Semaphore::new(config.preview_limit),
            config,
        })
    }

    fn voices_dir(&self) -> PathBuf {
        voices_dir(&self.config)
    }

    pub fn voices(&self) -> Vec<VoiceProfile> {
        let mut out: Vec<VoiceProfile> = self
            .config
            .builtin_voices
            .iter()
            .map(|v| VoiceProfile {
                voice_id: v.clone(),
                origin: VoiceOrigin::Builtin,
                enrollment_audio_ref: None,
            })
            .collect();
        let mut enrolled: Vec<VoiceProfile> = std::fs::read_dir(self.voices_dir())
            .into_iter()
            .flatten()
            .flatten()
            .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
            .filter_map(|e| serde_json::from_str(&std::fs::read_to_string(e.path()).ok()?).ok())
            .collect();
        enrolled.sort_by(|a, b| a.voice_id.cmp(&b.voice_id));
        out.extend(enrolled);
        out
    }

    pub fn knows_voice(&self, voice_id: &str) -> bool {
        self.config.builtin_voices.iter().any(|v| v == voice_id)
            || (!voice_id.contains(['/', '\\']) && self.voices_dir().join(format!("{voice_id}.json")).is_file())
    }

    fn eligible_book(&self, book_id: &str) -> ApiResult<&BookSummary> {
        let book = self.index.get(book_id).ok_or_else(|| not_found("book", book_id))?;
        if !book.eligible {
            return Err(ApiError::new(StatusCode::CONFLICT, format!("book {book_id:?} is not eligible")));
        }
        Ok(book)
    }

    fn check_voice(&self, voice: &VoiceChoice) -> ApiResult<()> {
        voice.validate().map_err(|m| ApiError::new(StatusCode::BAD_REQUEST, m))?;
        if !self.knows_voice(&voice.voice_id) {
            return Err(ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                format!("unknown voice {:?}", voice.voice_id),
            ));
        }
        Ok(())
    }
}

fn voices_dir(config: &ServiceConfig) -> PathBuf {
    config.data_dir.join("voices")
}

#[derive(Deserialize)]
struct SearchParams {
    #[serde(default)]
    q: String,
    limit: Option<usize>,
}

async fn list_books(State(st): State<Arc<AppState>>, Query(p): Query<SearchParams>) -> Json<Vec<BookSummary>> {
    Json(st.index.search(&p.q, p.limit.unwrap_or(DEFAULT_SEARCH_LIMIT)))
}

async fn get_book(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<BookDetail>> {
    let summary = st.index.get(&id).ok_or_else(|| not_found("book", &id))?.clone();
    let chapters = if summary.eligible {
        let script = st.index.script(&id).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?;
        script
            .chapters
            .iter()
            .map(|c| ChapterInfo {
                index: c.index,
                heading: c.heading.clone(),
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(Json(BookDetail { summary, chapters }))
}

async fn list_voices(State(st): State<Arc<AppState>>) -> Json<Vec<VoiceProfile>> {
    Json(st.voices())
}

async fn enroll(State(st): State<Arc<AppState>>, mut form: Multipart) -> ApiResult<Json<VoiceProfile>> {
    let mut audio = None;
    loop {
        let field = match form.next_field().await {
            Ok(Some(f)) => f,
            Ok(None) => break,
            Err(e) => return Err(ApiError::new(e.status(), e.body_text())),
        };
        if field.name() == Some("audio") {
            let bytes = field.bytes().await.map_err(|e| ApiError::new(e.status(), e.body_text()))?;
            audio = Some(bytes);
        }
    }
    let audio = audio.ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "missing multipart field \"audio\""))?;
    if audio.len() > MAX_ENROLL_BYTES {
        return Err(ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "audio exceeds 20 MB"));
    }
    let state = Arc::clone(&st);
    let profile = tokio::task::spawn_blocking(move || {
        let dir = state.voices_dir();
        let profile = enroll_voice(state.backend.as_ref(), &audio, &dir)?;
        let json = serde_json::to_string_pretty(&profile).expect("profile serializes");
        write_atomic(&dir.join(format!("{}.json", profile.voice_id)), json.as_bytes())?;
        Ok::<_, SynthesisError>(profile)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
    .map_err(|e| ApiError::new(synthesis_status(&e), e.to_string()))?;
    log::info!("enrolled voice {}", profile.voice_id);
    Ok(Json(profile))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PreviewRequest {
    book_id: String,
    chapter: Option<usize>,
    sentence_count: Option<usize>,
    voice: VoiceChoice,
}

static SENTENCE_END: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[.?!]\s+").unwrap());

/// The first `n` sentences of `text`. A sentence ends at `.`, `?` or `!`
/// followed by whitespace; the whitespace is dropped and sentences are
/// rejoined with single spaces.
pub fn first_sentences(text: &str, n: usize) -> String {
    let mut out = Vec::new();
    let mut start = 0;
    for m in SENTENCE_END.find_iter(text) {
        if out.len() == n {
            break;
        }
        out.push(&text[start..m.start() + 1]);
        start = m.end();
    }
    if out.len() < n && start < text.len() {
        out.push(&text[start..]);
    }
    out.join(" ")
}

/// Single-voice SSML for a preview.
pub fn preview_ssml(text: &str, voice: &VoiceChoice, lang: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<speak version=\"1.0\" xmlns=\"{SSML_NAMESPACE}\" xml:lang=\"{}\"><voice name=\"{}\"><prosody rate=\"{}\" pitch=\"{}\">{}</prosody></voice></speak>\n",
        escape_text(lang),
        escape_text(&voice.voice_id).replace('"', "&quot;"),
        format_rate(voice.rate),
        format_pitch(voice.pitch),
        escape_text(text)
    )
}

async fn preview(State(st): State<Arc<AppState>>, body: Option<Json<PreviewRequest>>) -> ApiResult<Response> {
    let Json(req) = body.ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "expected a JSON preview request"))?;
    let count = req.sentence_count.unwrap_or(st.config.default_preview_sentences);
    if count == 0 {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "sentence_count must be at least 1"));
    }
    st.eligible_book(&req.book_id)?;
    st.check_voice(&req.voice)?;
    let script = st
        .index
        .script(&req.book_id)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?;
    let chapter = match req.chapter {
        Some(i) => script.chapters.iter().find(|c| c.index == i),
        None => script.chapters.first(),
    }
    .ok_or_else(|| not_found("chapter", &req.chapter.unwrap_or(0).to_string()))?;
    let text: Vec<&str> = chapter.paragraphs.iter().map(|p| p.text.as_str()).collect();
    let excerpt = first_sentences(&text.join(" "), count);
    let lang = if script.language.is_empty() { "en" } else { &script.language };
    let request = SynthesisRequest {
        ssml: preview_ssml(&excerpt, &req.voice, lang),
        voice_id: req.voice.voice_id.clone(),
        rate: req.voice.rate,
        pitch: req.voice.pitch,
        sample_rate_hz: st.config.sample_rate_hz,
        emotion_style: None,
        segment_id: "preview".into(),
    };

    let _permit = st
        .previews
        .try_acquire()
        .map_err(|_| ApiError::new(StatusCode::TOO_MANY_REQUESTS, "too many previews in progress"))?;
    let backend = Arc::clone(&st.backend);
    let clip = tokio::task::spawn_blocking(move || backend.synthesize(&request))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(|e| ApiError::new(synthesis_status(&e), e.to_string()))?;
    let wav = encode_wav(&clip.samples, clip.sample_rate_hz);
    Ok(([(header::CONTENT_TYPE, "audio/wav")], wav).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JobRequest {
    book_id: String,
    voice: VoiceChoice,
    #[serde(default)]
    dedication: Option<String>,
}

async fn create_job(State(st): State<Arc<AppState>>, body: Option<Json<JobRequest>>) -> ApiResult<Response> {
    let Json(req) = body.ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, "expected a JSON job request"))?;
    st.eligible_book(&req.book_id)?;
    st.check_voice(&req.voice)?;
    let dedication = req.dedication.filter(|d| !d.trim().is_empty());
    if dedication.as_ref().is_some_and(|d| d.chars().count() > MAX_DEDICATION_CHARS) {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            format!("dedication longer than {MAX_DEDICATION_CHARS} characters"),
        ));
    }
    if !st.queue.has_room() {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "job queue is full"));
    }
    let now = jobs::now();
    let rec = JobRecord {
        job_id: new_job_id(),
        book_id: req.book_id,
        voice: req.voice,
        dedication,
        status: JobStatus::Queued,
        created: now.clone(),
        updated: now.clone(),
        artifact_path: None,
        error: None,
        history: vec![StatusChange {
            status: JobStatus::Queued,
            at: now,
        }],
    };
    st.store
        .create(&rec)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?;
    if !st.queue.push(rec.job_id.clone(), false) {
        // Lost a race for the last slot; the record stays queued and is
        // picked up on the next start.
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "job queue is full"));
    }
    Ok((StatusCode::ACCEPTED, Json(rec)).into_response())
}

async fn job_status(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<JobRecord>> {
    st.store.get(&id).map(Json).ok_or_else(|| not_found("job", &id))
}

async fn job_artifact(State(st): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let rec = st.store.get(&id).ok_or_else(|| not_found("job", &id))?;
    let rel = match (rec.status, &rec.artifact_path) {
        (JobStatus::Done, Some(p)) => p.clone(),
        _ => {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                format!("job {id} is {:?}, not done", rec.status).to_lowercase(),
            ))
        }
    };
    let bytes = tokio::fs::read(st.store.artifact_file(&rel))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let disposition = format!("attachment; filename=\"{}-{id}.zip\"", rec.book_id);
    Ok((
        [(header::CONTENT_TYPE, "application/zip".to_string()), (header::CONTENT_DISPOSITION, disposition)],
        bytes,
    )
        .into_response())
}

/// Runs one job to completion. Jobs found `running` were interrupted by a
/// restart and are simply run again.
fn run_job(st: &AppState, job_id: &str) {
    let Some(rec) = st.store.get(job_id) else {
        log::warn!("job {job_id} vanished");
        return;
    };
    let rec = match rec.status {
        JobStatus::Queued => match st.store.transition(job_id, JobStatus::Running, |_| {}) {
            Ok(r) => r,
            Err(e) => return log::warn!("{e}"),
        },
        JobStatus::Running => rec,
        JobStatus::Done | JobStatus::Failed => return,
    };
    let settings = RenderSettings {
        backend: st.backend.as_ref(),
        ssml: &st.config.ssml,
        sample_rate_hz: st.config.sample_rate_hz,
    };
    let result = st.index.script(&rec.book_id).and_then(|script| {
        let script = job_script(script, &rec);
        let zip = build_artifact(&script, &rec.voice, &settings)?;
        let rel = format!("artifacts/{job_id}.zip");
        write_atomic(&st.store.artifact_file(&rel), &zip).map_err(|e| e.to_string())?;
        Ok(rel)
    });
    let outcome = match result {
        Ok(rel) => st.store.transition(job_id, JobStatus::Done, |r| r.artifact_path = Some(rel)),
        Err(msg) => {
            log::warn!("job {job_id} failed: {msg}");
            st.store.transition(job_id, JobStatus::Failed, |r| r.error = Some(msg))
        }
    };
    if let Err(e) = outcome {
        log::warn!("{e}");
    }
}

/// Starts the job workers and re-queues unfinished jobs from disk.
fn start_workers(st: &Arc<AppState>) {
    for job in st.store.all() {
        if matches!(job.status, JobStatus::Queued | JobStatus::Running) {
            st.queue.push(job.job_id, true);
        }
    }
    for _ in 0..st.config.job_workers {
        let st = Arc::clone(st);
        tokio::spawn(async move {
            loop {
                let id = st.queue.pop().await;
                let worker_state = Arc::clone(&st);
                if let Err(e) = tokio::task::spawn_blocking(move || run_job(&worker_state, &id)).await {
                    log::error!("job worker panicked: {e}");
                }
            }
        });
    }
}

pub fn router(st: Arc<AppState>) -> Router {
    let origins: Vec<HeaderValue> = st
        .config
        .cors_origins
        .iter()
        .filter_map(|o| HeaderValue::from_str(o).ok())
        .collect();
    let cors = CorsLayer::new()
        .allow_origin(AllowOrigin::list(origins))
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE]);
    Router::new()
        .route("/books", get(list_books))
        .route("/books/{id}", get(get_book))
        .route("/voices", get(list_voices))
        .route(
            "/voices/enroll",
            // Room for the multipart framing around a maximal file.
            post(enroll).layer(DefaultBodyLimit::max(MAX_ENROLL_BYTES + 64 * 1024)),
        )
        .route("/preview", post(preview))
        .route("/jobs", post(create_job))
        .route("/jobs/{id}", get(job_status))
        .route("/jobs/{id}/artifact", get(job_artifact))
        .layer(cors)
        .with_state(st)
}

/// Binds, starts workers and serves until `shutdown` resolves.
pub async fn serve(
    config: ServiceConfig,
    listener: TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), String> {
    let st = Arc::new(AppState::new(config)?);
    start_workers(&st);
    log::info!("serving {} books on {}", st.index.len(), listener.local_addr().map_err(|e| e.to_string())?);
    axum::serve(listener, router(st))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| e.to_string())
}

/// Serves on `config.bind` until interrupted.
pub fn run_blocking(config: ServiceConfig) -> Result<(), String> {
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let listener = TcpListener::bind(&config.bind).await.map_err(|e| format!("{}: {e}", config.bind))?;
        serve(config, listener, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
    })
}

/// A service running on its own thread; dropping it stops the server.
pub struct BackgroundService {
    pub addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl BackgroundService {
    /// Starts on an ephemeral localhost port, ignoring `config.bind`.
    pub fn start(config: ServiceConfig) -> Result<BackgroundService, String> {
        // Fail fast on a bad library before spawning.
        AppState::new(config.clone())?;
        let (addr_tx, addr_rx) = std::sync::mpsc::channel();
        let (stop_tx, stop_rx) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
            rt.block_on(async {
                let listener = match TcpListener::bind("127.0.0.1:0").await {
                    Ok(l) => l,
                    Err(e) => return addr_tx.send(Err(e.to_string())).unwrap_or(()),
                };
                let _ = addr_tx.send(listener.local_addr().map_err(|e| e.to_string()));
                if let Err(e) = serve(config, listener, async {
                    let _ = stop_rx.await;
                })
                .await
                {
                    log::error!("{e}");
                }
            });
            rt.shutdown_background();
        });
        let addr = addr_rx.recv().map_err(|e| e.to_string())??;
        Ok(BackgroundService {
            addr,
            stop: Some(stop_tx),
            thread: Some(thread),
        })
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for BackgroundService {
    fn drop(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentence_split() {
        let t = "One. Two? Three! Four";
        assert_eq!(first_sentences(t, 1), "One.");
        assert_eq!(first_sentences(t, 2), "One. Two?");
        assert_eq!(first_sentences(t, 4), t);
        assert_eq!(first_sentences(t, 9), t);
        assert_eq!(first_sentences("“Wow!” he said. Next", 1), "“Wow!” he said.");
        assert_eq!(first_sentences("Ends here.  ", 3), "Ends here.");
    }
}

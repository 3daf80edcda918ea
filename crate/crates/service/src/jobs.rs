//! File-backed job records and the FIFO work queue.

use std::collections::VecDeque;
use std::fs;
use std::io::{Cursor, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use audiobook_core::script::{NarrationScript, NARRATOR};
use audiobook_core::synthesis::{render_chapter_wav, write_atomic, SynthesisBackend, MAX_RATE, MIN_RATE};
use audiobook_core::orchestrator::{SsmlDialect, SCRIPT_FILE};
use audiobook_core::script::SsmlOptions;
use serde::{Deserialize, Serialize};
use tokio::sync::Notify;
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, ZipWriter};

pub const MAX_DEDICATION_CHARS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    /// Allowed moves: queued to running, running to done or failed.
    pub fn can_become(self, next: JobStatus) -> bool {
        use JobStatus::*;
        matches!((self, next), (Queued, Running) | (Running, Done) | (Running, Failed))
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoiceChoice {
    pub voice_id: String,
    #[serde(default = "one")]
    pub rate: f64,
    #[serde(default)]
    pub pitch: f64,
}

impl VoiceChoice {
    pub fn validate(&self) -> Result<(), String> {
        if !(MIN_RATE..=MAX_RATE).contains(&self.rate) {
            return Err(format!("rate must lie in [{MIN_RATE}, {MAX_RATE}]"));
        }
        if !self.pitch.is_finite() || self.pitch.abs() > 12.0 {
            return Err("pitch must lie in [-12, 12] semitones".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub book_id: String,
    pub voice: VoiceChoice,
    pub dedication: Option<String>,
    pub status: JobStatus,
    pub created: String,
    pub updated: String,
    /// Relative to the service data directory.
    pub artifact_path: Option<String>,
    pub error: Option<String>,
    /// Every status the job has held, oldest first.
    #[serde(default)]
    pub history: Vec<StatusChange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusChange {
    pub status: JobStatus,
    pub at: String,
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

pub fn new_job_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

fn valid_job_id(id: &str) -> bool {
    id.len() == 32 && id.bytes().all(|b| b.is_ascii_hexdigit())
}

/// One JSON file per job under `<data>/jobs`, replaced atomically on every
/// change. Mutations are serialized by a store-wide lock.
pub struct JobStore {
    data_dir: PathBuf,
    lock: Mutex<()>,
}

impl JobStore {
    pub fn open(data_dir: &Path) -> std::io::Result<JobStore> {
        fs::create_dir_all(data_dir.join("jobs"))?;
        fs::create_dir_all(data_dir.join("artifacts"))?;
        Ok(JobStore {
            data_dir: data_dir.to_path_buf(),
            lock: Mutex::new(()),
        })
    }

    fn path(&self, job_id: &str) -> PathBuf {
        self.data_dir.join("jobs").join(format!("{job_id}.json"))
    }

    pub fn artifact_file(&self, rel: &str) -> PathBuf {
        self.data_dir.join(rel)
    }

    fn write(&self, rec: &JobRecord) -> Result<(), String> {
        let mut text = serde_json::to_string_pretty(rec).expect("job serializes");
        text.push('\n');
        write_atomic(&self.path(&rec.job_id), text.as_bytes()).map_err(|e| e.to_string())
    }

    pub fn create(&self, rec: &JobRecord) -> Result<(), String> {
        let _g = self.lock.lock().expect("job store lock");
        if self.path(&rec.job_id).exists() {
            return Err(format!("job {} already exists", rec.job_id));
        }
        self.write(rec)
    }

    pub fn get(&self, job_id: &str) -> Option<JobRecord> {
        if !valid_job_id(job_id) {
            return None;
        }
        let text = fs::read_to_string(self.path(job_id)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Every stored job, oldest first.
    pub fn all(&self) -> Vec<JobRecord> {
        let Ok(dir) = fs::read_dir(self.data_dir.join("jobs")) else {
            return Vec::new();
        };
        let mut jobs: Vec<JobRecord> = dir
            .flatten()
            .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
            .filter_map(|e| serde_json::from_str(&fs::read_to_string(e.path()).ok()?).ok())
            .collect();
        jobs.sort_by(|a, b| a.created.cmp(&b.created).then(a.job_id.cmp(&b.job_id)));
        jobs
    }

    /// Moves a job to `next`, applying `edit` first. Refuses moves the
    /// status machine does not allow.
    pub fn transition(
        &self,
        job_id: &str,
        next: JobStatus,
        edit: impl FnOnce(&mut JobRecord),
    ) -> Result<JobRecord, String> {
        let _g = self.lock.lock().expect("job store lock");
        let mut rec = self.get(job_id).ok_or_else(|| format!("job {job_id} not found"))?;
        if !rec.status.can_become(next) {
            return Err(format!("job {job_id}: {:?} cannot become {:?}", rec.status, next));
        }
        edit(&mut rec);
        rec.status = next;
        rec.updated = now();
        rec.history.push(StatusChange {
            status: next,
            at: rec.updated.clone(),
        });
        self.write(&rec)?;
        Ok(rec)
    }
}

/// FIFO of job ids waiting for a worker.
pub struct JobQueue {
    pending: Mutex<VecDeque<String>>,
    notify: Notify,
    cap: usize,
}

impl JobQueue {
    pub fn new(cap: usize) -> JobQueue {
        JobQueue {
            pending: Mutex::new(VecDeque::new()),
            notify: Notify::new(),
            cap,
        }
    }

    /// Adds a job unless the queue is at capacity. `force` skips the cap,
    /// for jobs recovered at start-up.
    pub fn push(&self, job_id: String, force: bool) -> bool {
        let mut q = self.pending.lock().expect("queue lock");
        if !force && q.len() >= self.cap {
            return false;
        }
        q.push_back(job_id);
        drop(q);
        self.notify.notify_one();
        true
    }

    pub fn has_room(&self) -> bool {
        self.pending.lock().expect("queue lock").len() < self.cap
    }

    pub async fn pop(&self) -> String {
        loop {
            let notified = self.notify.notified();
            if let Some(id) = self.pending.lock().expect("queue lock").pop_front() {
                return id;
            }
            notified.await;
        }
    }
}

/// Everything a worker needs to turn a job into an artifact.
pub struct RenderSettings<'a> {
    pub backend: &'a dyn SynthesisBackend,
    pub ssml: &'a SsmlDialect,
    pub sample_rate_hz: u32,
}

/// Applies the job's voice and dedication to a book script. The chosen
/// voice reads everything the narrator reads; rate and pitch apply
/// globally.
pub fn job_script(mut script: NarrationScript, job: &JobRecord) -> NarrationScript {
    if let Some(d) = &job.dedication {
        script.prepend_dedication(d);
    }
    if let Some(spec) = script.cast.get_mut(NARRATOR) {
        spec.voice_id = job.voice.voice_id.clone();
    }
    script
}

pub fn job_ssml_options(script: &NarrationScript, voice: &VoiceChoice, dialect: &SsmlDialect) -> SsmlOptions {
    SsmlOptions {
        rate: voice.rate,
        pitch: voice.pitch,
        lang: if script.language.is_empty() { "en".into() } else { script.language.clone() },
        style_element: dialect.style_element.clone(),
        style_attribute: dialect.style_attribute.clone(),
        namespaces: dialect.namespaces.clone(),
        emotion_styles: dialect.emotion_styles.clone(),
    }
}

/// Renders every chapter and zips the WAVs with the script. Returns the
/// archive bytes.
pub fn build_artifact(script: &NarrationScript, voice: &VoiceChoice, settings: &RenderSettings) -> Result<Vec<u8>, String> {
    let opts = job_ssml_options(script, voice, settings.ssml);
    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    let file_opts = SimpleFileOptions::default().compression_method(CompressionMethod::Stored);
    for chapter in &script.chapters {
        let (wav, _) = render_chapter_wav(settings.backend, chapter, &script.cast, &opts, settings.sample_rate_hz)
            .map_err(|e| format!("{}: {e}", chapter.file_stem()))?;
        zip.start_file(format!("{}.wav", chapter.file_stem()), file_opts)
            .map_err(|e| e.to_string())?;
        zip.write_all(&wav).map_err(|e| e.to_string())?;
    }
    zip.start_file(SCRIPT_FILE, file_opts).map_err(|e| e.to_string())?;
    zip.write_all(script.to_json().as_bytes()).map_err(|e| e.to_string())?;
    Ok(zip.finish().map_err(|e| e.to_string())?.into_inner())
}

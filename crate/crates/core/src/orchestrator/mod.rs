//! Batch pipeline over a corpus: parallel per-book work, a clustering
//! barrier, and a resumable manifest.

mod config;
mod manifest;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;
use thiserror::Error;

pub use config::{BackendConfig, BackendKind, PipelineConfig, SsmlDialect, Stage, VoiceConfig};
pub use manifest::{
    collection_stats, BookStatus, CollectionStats, Manifest, ManifestEntry, ManifestHeader, RemovalSummary,
    Timestamps, MANIFEST_FILE, MANIFEST_FORMAT, TIMESTAMP_MARKER,
};

use crate::cluster::{emit_scatter_plot, kmeans_best_of, project_2d, write_model, ClusterError, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use crate::dom::{parse_html, DomTree};
use crate::features::{featurize_corpus, write_feature_matrix, BookFeatures, FeatureError};
use crate::ingest::{load_ebook, scan_corpus, EbookRef, IngestError, Metadata};
use crate::normalize::{apply_rules, classify_ruleset, RuleSet, RulesetChoice};
use crate::script::{build_script, export_ssml};
use crate::synthesis::{duration_ms, render_chapter, write_atomic, SynthesisBackend};

pub const FEATURES_FILE: &str = "features.tsv";
pub const MODEL_FILE: &str = "model.kmeans";
pub const PLOT_FILE: &str = "clusters.svg";
pub const REPORT_FILE: &str = "report.json";
pub const SCRIPT_FILE: &str = "script.json";

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("corpus contains no books")]
    CorpusEmpty,
    #[error("manifest was built with config {found}, current config is {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("invalid manifest: {0}")]
    ManifestInvalid(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

fn io_err(path: &Path, e: impl ToString) -> OrchestratorError {
    OrchestratorError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Result of a run: the final manifest and the books that were processed
/// rather than carried over from an earlier manifest.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub reprocessed: Vec<String>,
}

impl RunOutcome {
    pub fn failed(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.manifest.entries.iter().filter(|e| e.status == BookStatus::Failed)
    }
}

pub fn manifest_path(config: &PipelineConfig) -> PathBuf {
    config.output_root.join(MANIFEST_FILE)
}

/// Fresh build of every book.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunOutcome, OrchestratorError> {
    run(config, None)
}

/// Continues from `existing`: books that are done with every output on disk
/// are carried over, the rest are rebuilt.
pub fn resume(config: &PipelineConfig, existing: &Manifest) -> Result<RunOutcome, OrchestratorError> {
    let expected = config.fingerprint()?;
    if existing.header.fingerprint != expected {
        return Err(OrchestratorError::FingerprintMismatch {
            expected,
            found: existing.header.fingerprint.clone(),
        });
    }
    run(config, Some(existing))
}

/// Loads the manifest under the output root.
pub fn load_manifest(config: &PipelineConfig) -> Result<Manifest, OrchestratorError> {
    Manifest::load(&manifest_path(config))
}

/// Serializes manifest updates; every write goes through temp file and rename.
struct Writer {
    path: PathBuf,
    manifest: Mutex<Manifest>,
    /// Resumes leave the previous manifest in place until a book changes.
    eager: bool,
    /// Set once this run has replaced the file on disk.
    written: AtomicBool,
}

impl Writer {
    fn update(&self, f: impl FnOnce(&mut Manifest), write: bool) -> Result<(), OrchestratorError> {
        let mut m = self.manifest.lock().expect("manifest lock");
        f(&mut m);
        if write {
            m.write(&self.path)?;
            self.written.store(true, Ordering::Relaxed);
        }
        Ok(())
    }

    fn set_entry(&self, entry: ManifestEntry, write: bool) -> Result<(), OrchestratorError> {
        self.update(
            |m| match m.entries.binary_search_by(|e| e.book_id.cmp(&entry.book_id)) {
                Ok(i) => m.entries[i] = entry,
                Err(i) => m.entries.insert(i, entry),
            },
            write,
        )
    }
}

/// Writes only when the content differs, so reruns leave files untouched.
fn write_if_changed(path: &Path, bytes: &[u8]) -> Result<(), OrchestratorError> {
    if fs::read(path).ok().as_deref() == Some(bytes) {
        return Ok(());
    }
    write_atomic(path, bytes).map_err(|e| io_err(path, e))
}

struct LoadedBook {
    book_id: String,
    metadata: Metadata,
    tree: DomTree,
}

fn load_one(r: &EbookRef) -> Result<(LoadedBook, BookFeatures), String> {
    let doc = load_ebook(r).map_err(|e| e.to_string())?;
    let tree = parse_html(&doc.raw_html);
    let features = BookFeatures::from_tree(&doc.book_id, &tree);
    Ok((
        LoadedBook {
            book_id: doc.book_id,
            metadata: doc.metadata,
            tree,
        },
        features,
    ))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

fn run(config: &PipelineConfig, previous: Option<&Manifest>) -> Result<RunOutcome, OrchestratorError> {
    config.validate()?;
    let fingerprint = config.fingerprint()?;
    let rulesets = config.load_rulesets()?;
    let keep = config.keep_table()?;
    let backend = config.backend.build()?;
    let started = now();

    let refs = scan_corpus(&config.corpus_root)?;
    if refs.is_empty() {
        return Err(OrchestratorError::CorpusEmpty);
    }
    let out = config.output_root.as_path();
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count)
        .build()
        .map_err(|e| OrchestratorError::ConfigInvalid(format!("worker pool: {e}")))?;

    let writer = Writer {
        path: manifest_path(config),
        manifest: Mutex::new(Manifest::new(&fingerprint)),
        eager: previous.is_none(),
        written: AtomicBool::new(false),
    };

    // Stage: load and featurize, in parallel; results keep scan order.
    log::info!("loading {} books with {} workers", refs.len(), config.worker_count);
    let loaded: Vec<Result<(LoadedBook, BookFeatures), String>> = pool.install(|| refs.par_iter().map(load_one).collect());
    let mut books = Vec::new();
    let mut features = Vec::new();
    for (r, result) in refs.iter().zip(loaded) {
        match result {
            Ok((book, f)) => {
                let mut e = ManifestEntry::new(&book.book_id);
                e.title = book.metadata.title.clone();
                e.author = book.metadata.author.clone();
                e.status = BookStatus::Done;
                writer.set_entry(e, false)?;
                books.push(book);
                features.push(f);
            }
            Err(msg) => {
                log::warn!("{}: {msg}", r.book_id);
                writer.set_entry(ManifestEntry::new(&r.book_id).failed(msg), false)?;
            }
        }
    }
    let (_, vectors) = featurize_corpus(&features, config.min_df, config.max_terms)?;
    write_if_changed(&out.join(FEATURES_FILE), write_feature_matrix(&vectors).as_bytes())?;
    if config.has_stage(Stage::Normalize) {
        mark_incomplete(&writer, "features")?;
    }
    writer.update(|_| {}, writer.eager)?;

    // Stage: cluster. Barrier over every feature vector.
    let mut clusters: BTreeMap<String, usize> = BTreeMap::new();
    if config.has_stage(Stage::Cluster) {
        if books.len() < config.k {
            return Err(OrchestratorError::ConfigInvalid(format!(
                "k = {} but only {} books loaded",
                config.k,
                books.len()
            )));
        }
        let matrix: Vec<Vec<f64>> = vectors.iter().map(|v| v.combined.clone()).collect();
        let fit = kmeans_best_of(&matrix, config.k, config.seed, config.restarts, DEFAULT_MAX_ITERS, DEFAULT_TOL)?;
        write_if_changed(&out.join(MODEL_FILE), write_model(&fit.model).as_bytes())?;
        let points = project_2d(&matrix)?;
        let plot_tmp = out.join(format!(".{PLOT_FILE}.render"));
        emit_scatter_plot(&points, &fit.labels, &plot_tmp)?;
        let svg = fs::read(&plot_tmp).map_err(|e| io_err(&plot_tmp, e))?;
        let _ = fs::remove_file(&plot_tmp);
        write_if_changed(&out.join(PLOT_FILE), &svg)?;
        for (v, &label) in vectors.iter().zip(&fit.labels) {
            clusters.insert(v.book_id.clone(), label);
        }
        writer.update(
            |m| {
                for e in &mut m.entries {
                    e.cluster_id = clusters.get(&e.book_id).copied();
                }
            },
            writer.eager,
        )?;
    }

    // Per-book stages.
    let mut reprocessed = Vec::new();
    if config.has_stage(Stage::Normalize) {
        let ctx = BookContext {
            config,
            rulesets: &rulesets,
            keep: &keep,
            backend: backend.as_ref(),
            out,
        };
        let results: Vec<Result<Option<String>, OrchestratorError>> = pool.install(|| {
            books
                .par_iter()
                .map(|book| {
                    let cluster_id = clusters[&book.book_id];
                    let prior = previous.and_then(|p| p.entry(&book.book_id));
                    if let Some(prev) = prior.filter(|p| carry_over(p, cluster_id, &keep, out)) {
                        writer.set_entry(prev.clone(), false)?;
                        return Ok(None);
                    }
                    let entry = panic::catch_unwind(AssertUnwindSafe(|| ctx.process(book, cluster_id)))
                        .unwrap_or_else(|p| {
                            ManifestEntry::new(&book.book_id).failed(format!("panicked: {}", panic_message(p)))
                        });
                    if entry.status == BookStatus::Failed {
                        log::warn!("{}: {}", book.book_id, entry.error.as_deref().unwrap_or(""));
                    }
                    writer.set_entry(entry, true)?;
                    Ok(Some(book.book_id.clone()))
                })
                .collect()
        });
        for r in results {
            if let Some(id) = r? {
                reprocessed.push(id);
            }
        }
    }
    // Books that failed to load are retried on every run.
    if previous.is_some() {
        let m = writer.manifest.lock().expect("manifest lock");
        reprocessed.extend(
            m.entries
                .iter()
                .filter(|e| e.status == BookStatus::Failed && !books.iter().any(|b| b.book_id == e.book_id))
                .map(|e| e.book_id.clone()),
        );
    }
    reprocessed.sort();

    let touched = writer.written.load(Ordering::Relaxed);
    let mut manifest = writer.manifest.into_inner().expect("manifest lock");
    manifest.header.complete = true;
    manifest.sort();
    let unchanged = previous.filter(|p| !touched && p.header.complete && p.body() == manifest.body());
    if let Some(prev) = unchanged {
        // Nothing changed; leave the file and its timestamps alone.
        manifest.timestamps = prev.timestamps.clone();
    } else {
        manifest.timestamps = Timestamps {
            started,
            finished: now(),
            mode: if previous.is_some() { "resume" } else { "run" }.into(),
        };
        manifest.write(&manifest_path(config))?;
    }
    Ok(RunOutcome { manifest, reprocessed })
}

/// Marks every loaded book as not yet finished, for the interim manifest.
fn mark_incomplete(writer: &Writer, after: &str) -> Result<(), OrchestratorError> {
    writer.update(
        |m| {
            for e in m.entries.iter_mut().filter(|e| e.status == BookStatus::Done) {
                e.status = BookStatus::Failed;
                e.error = Some(format!("incomplete: run stopped after {after}"));
            }
        },
        false,
    )
}

/// Whether an earlier entry can stand in for rebuilding the book.
fn carry_over(prev: &ManifestEntry, cluster_id: usize, keep: &BTreeMap<usize, String>, out: &Path) -> bool {
    if prev.cluster_id != Some(cluster_id) {
        return false;
    }
    match prev.status {
        BookStatus::Done => prev.outputs_present(out),
        // Re-classifying is the whole job for an excluded book.
        BookStatus::Excluded => classify_ruleset(cluster_id, keep) == RulesetChoice::Excluded,
        BookStatus::Failed => false,
    }
}

struct BookContext<'a> {
    config: &'a PipelineConfig,
    rulesets: &'a BTreeMap<String, RuleSet>,
    keep: &'a BTreeMap<usize, String>,
    backend: &'a dyn SynthesisBackend,
    out: &'a Path,
}

impl BookContext<'_> {
    fn process(&self, book: &LoadedBook, cluster_id: usize) -> ManifestEntry {
        let mut entry = ManifestEntry::new(&book.book_id);
        entry.title = book.metadata.title.clone();
        entry.author = book.metadata.author.clone();
        entry.cluster_id = Some(cluster_id);
        match self.build(book, &mut entry) {
            Ok(()) => {
                entry.status = if entry.ruleset_id.is_some() {
                    BookStatus::Done
                } else {
                    BookStatus::Excluded
                };
                entry
            }
            Err(msg) => entry.failed(msg),
        }
    }

    fn build(&self, book: &LoadedBook, entry: &mut ManifestEntry) -> Result<(), String> {
        let cfg = self.config;
        let dir = self.out.join(&book.book_id);
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| format!("clearing {}: {e}", dir.display()))?;
        }
        let ruleset_id = match classify_ruleset(entry.cluster_id.expect("clustered"), self.keep) {
            RulesetChoice::Excluded => return Ok(()),
            RulesetChoice::Ruleset(id) => id,
        };
        let ruleset = self
            .rulesets
            .get(&ruleset_id)
            .ok_or_else(|| format!("unknown rule set {ruleset_id:?}"))?;
        entry.ruleset_id = Some(ruleset_id);
        fs::create_dir_all(&dir).map_err(|e| format!("creating {}: {e}", dir.display()))?;
        let write = |name: &str, bytes: &[u8], entry: &mut ManifestEntry| -> Result<(), String> {
            write_atomic(&dir.join(name), bytes).map_err(|e| format!("writing {name}: {e}"))?;
            entry.outputs.push(format!("{}/{name}", book.book_id));
            Ok(())
        };

        let normalized = apply_rules(&book.book_id, &book.tree, ruleset).map_err(|e| e.to_string())?;
        let mut report = serde_json::to_string_pretty(&normalized.report).expect("report serializes");
        report.push('\n');
        write(REPORT_FILE, report.as_bytes(), entry)?;
        entry.removal = Some(RemovalSummary::from(&normalized.report));
        if !cfg.has_stage(Stage::Script) {
            return Ok(());
        }

        let script = build_script(&book.book_id, &book.metadata, &normalized.tree, &cfg.script_options())
            .map_err(|e| e.to_string())?;
        entry.chapter_count = script.chapters.len();
        write(SCRIPT_FILE, script.to_json().as_bytes(), entry)?;
        let ssml_opts = cfg.ssml_options(&book.metadata.language);
        let docs = export_ssml(&script, &ssml_opts).map_err(|e| e.to_string())?;
        for (chapter, doc) in script.chapters.iter().zip(&docs) {
            write(&format!("{}.ssml", chapter.file_stem()), doc.as_bytes(), entry)?;
        }
        if !cfg.has_stage(Stage::Audio) {
            return Ok(());
        }

        let mut samples = 0;
        for chapter in &script.chapters {
            let name = format!("{}.wav", chapter.file_stem());
            samples += render_chapter(self.backend, chapter, &script.cast, &ssml_opts, cfg.sample_rate_hz, &dir.join(&name))
                .map_err(|e| format!("{}: {e}", chapter.file_stem()))?;
            entry.outputs.push(format!("{}/{name}", book.book_id));
        }
        entry.audio_duration_ms = duration_ms(samples, cfg.sample_rate_hz);
        Ok(())
    }
}

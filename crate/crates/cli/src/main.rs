use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use audiobook_core::cluster::{
    emit_scatter_plot, kmeans_best_of, project_2d, read_model, write_model, DEFAULT_MAX_ITERS, DEFAULT_TOL,
};
use audiobook_core::dom::parse_html;
use audiobook_core::features::{featurize_corpus, read_feature_matrix, write_feature_matrix, BookFeatures};
use audiobook_core::ingest::{load_ebook, scan_corpus, EbookRef};
use audiobook_core::normalize::{apply_rules, RuleSet};
use audiobook_core::orchestrator::{
    collection_stats, load_manifest, resume, run_pipeline, Manifest, OrchestratorError, PipelineConfig, Stage,
};
use audiobook_core::script::{build_script, export_ssml};
use audiobook_service::ServiceConfig;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "audiobook", version, about = "Turn HTML e-books into narration scripts and audiobooks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the books under a corpus directory.
    Scan {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Write the feature matrix of a corpus.
    Features {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        min_df: Option<usize>,
        #[arg(long)]
        max_terms: Option<usize>,
    },
    /// Fit k-means to a feature matrix; prints each book's cluster.
    Cluster {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Scatter plot of a feature matrix coloured by a model's clusters.
    Plot {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Clean one book with a rule set.
    Normalize {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Rule set id from the config, or a rule set file.
        #[arg(long, default_value = "std-v1")]
        ruleset: String,
        /// Removal report; printed to stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build the narration script of one (normalized) book.
    Script {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write one SSML file per chapter here.
        #[arg(long)]
        ssml_dir: Option<PathBuf>,
    },
    /// Run the whole pipeline over a corpus.
    Build {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated stage prefix, e.g. features,cluster.
        #[arg(long, value_delimiter = ',')]
        stages: Option<Vec<String>>,
        /// Continue from the manifest in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Books done and total hours from a manifest.
    Stats {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        library: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
    },
}

/// Failure classes, mapped onto exit codes.
enum Failure {
    /// Bad flags or config: exit 2.
    Usage(String),
    /// Anything else that stopped the command: exit 1.
    Runtime(String),
}

impl From<OrchestratorError> for Failure {
    fn from(e: OrchestratorError) -> Self {
        match e {
            OrchestratorError::ConfigInvalid(_) | OrchestratorError::FingerprintMismatch { .. } => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn pipeline_config(path: Option<&Path>) -> Result<PipelineConfig, Failure> {
    match path {
        Some(p) => PipelineConfig::load(p).map_err(Failure::from),
        None => Ok(PipelineConfig::default()),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn single_book(path: &Path) -> Result<EbookRef, Failure> {
    let meta = fs::metadata(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    let book_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Failure::Usage(format!("{} has no file name", path.display())))?
        .to_string();
    Ok(EbookRef {
        book_id,
        path: path.to_path_buf(),
        size_bytes: meta.len(),
    })
}

/// Returns true when some books failed.
fn dispatch(command: Command) -> Result<bool, Failure> {
    match command {
        Command::Scan { corpus } => {
            for r in scan_corpus(&corpus).map_err(runtime)? {
                println!("{}\t{}\t{}", r.book_id, r.size_bytes, r.path.display());
            }
        }
        Command::Features {
            config,
            corpus,
            out,
            min_df,
            max_terms,
        } => {
            let cfg = pipeline_config(config.as_deref())?;
            let corpus = corpus.unwrap_or(cfg.corpus_root);
            let mut books = Vec::new();
            for r in scan_corpus(&corpus).map_err(runtime)? {
                let doc = load_ebook(&r).map_err(runtime)?;
                books.push(BookFeatures::from_tree(&doc.book_id, &parse_html(&doc.raw_html)));
            }
            let (vocab, vectors) =
                featurize_corpus(&books, min_df.unwrap_or(cfg.min_df), max_terms.unwrap_or(cfg.max_terms)).map_err(runtime)?;
            write_file(&out, write_feature_matrix(&vectors).as_bytes())?;
            log::info!("{} books, {} terms -> {}", vectors.len(), vocab.len(), out.display());
        }
        Command::Cluster {
            config,
            features,
            out,
            k,
            seed,
            restarts,
        } => {
            let cfg = pipeline_config(config.as_deref())?;
            let rows = read_feature_matrix(&read_file(&features)?).map_err(runtime)?;
            let matrix: Vec<Vec<f64>> = rows.iter().map(|(_, v)| v.clone()).collect();
            let k = k.unwrap_or(cfg.k);
            let fit = kmeans_best_of(
                &matrix,
                k,
                seed.unwrap_or(cfg.seed),
                restarts.unwrap_or(cfg.restarts),
                DEFAULT_MAX_ITERS,
                DEFAULT_TOL,
            )
            .map_err(|e| Failure::Usage(e.to_string()))?;
            write_file(&out, write_model(&fit.model).as_bytes())?;
            for ((id, _), label) in rows.iter().zip(&fit.labels) {
                println!("{id}\t{label}");
            }
            log::info!("k = {k}, inertia {}", fit.model.inertia);
        }
        Command::Plot { features, model, out } => {
            let rows = read_feature_matrix(&read_file(&features)?).map_err(runtime)?;
            let model = read_model(&read_file(&model)?).map_err(runtime)?;
            let matrix: Vec<Vec<f64>> = rows.into_iter().map(|(_, v)| v).collect();
            let labels = matrix
                .iter()
                .map(|v| model.assign(v).map(|(c, _)| c))
                .collect::<Result<Vec<_>, _>>()
                .map_err(runtime)?;
            let points = project_2d(&matrix).map_err(runtime)?;
            emit_scatter_plot(&points, &labels, &out).map_err(runtime)?;
        }
        Command::Normalize {
            config,
            input,
            out,
            ruleset,
            report,
        } => {
            let cfg = pipeline_config(config.as_deref())?;
            let rules = match cfg.load_rulesets()?.remove(&ruleset) {
                Some(r) => r,
                None => RuleSet::load(Path::new(&ruleset)).map_err(|e| Failure::Usage(e.to_string()))?,
            };
            let doc = load_ebook(&single_book(&input)?).map_err(runtime)?;
            let normalized = apply_rules(&doc.book_id, &parse_html(&doc.raw_html), &rules).map_err(runtime)?;
            write_file(&out, normalized.tree.to_html().as_bytes())?;
            let json = serde_json::to_string_pretty(&normalized.report).expect("report serializes") + "\n";
            match report {
                Some(p) => write_file(&p, json.as_bytes())?,
                None => print!("{json}"),
            }
        }
        Command::Script {
            config,
            input,
            out,
            ssml_dir,
        } => {
            let cfg = pipeline_config(config.as_deref())?;
            let doc = load_ebook(&single_book(&input)?).map_err(runtime)?;
            let script = build_script(&doc.book_id, &doc.metadata, &parse_html(&doc.raw_html), &cfg.script_options())
                .map_err(runtime)?;
            write_file(&out, script.to_json().as_bytes())?;
            if let Some(dir) = ssml_dir {
                let docs = export_ssml(&script, &cfg.ssml_options(&script.language)).map_err(runtime)?;
                for (chapter, doc) in script.chapters.iter().zip(docs) {
                    write_file(&dir.join(format!("{}.ssml", chapter.file_stem())), doc.as_bytes())?;
                }
            }
        }
        Command::Build {
            config,
            corpus,
            out,
            workers,
            k,
            seed,
            stages,
            resume: resuming,
        } => {
            let mut cfg = pipeline_config(config.as_deref())?;
            if let Some(v) = corpus {
                cfg.corpus_root = v;
            }
            if let Some(v) = out {
                cfg.output_root = v;
            }
            if let Some(v) = workers {
                cfg.worker_count = v;
            }
            if let Some(v) = k {
                cfg.k = v;
            }
            if let Some(v) = seed {
                cfg.seed = v;
            }
            if let Some(names) = stages {
                cfg.stages = names
                    .iter()
                    .map(|n| {
                        serde_json::from_value::<Stage>(serde_json::Value::String(n.trim().to_string()))
                            .map_err(|_| Failure::Usage(format!("unknown stage {n:?}")))
                    })
                    .collect::<Result<_, _>>()?;
            }
            let outcome = if resuming {
                let existing = load_manifest(&cfg)?;
                resume(&cfg, &existing)?
            } else {
                run_pipeline(&cfg)?
            };
            let failed: Vec<_> = outcome.failed().collect();
            let stats = collection_stats(&outcome.manifest);
            log::info!(
                "{} books: {} done, {} failed, {} processed this run",
                outcome.manifest.entries.len(),
                stats.books_done,
                failed.len(),
                outcome.reprocessed.len()
            );
            for e in &failed {
                log::warn!("{}: {}", e.book_id, e.error.as_deref().unwrap_or("failed"));
            }
            return Ok(!failed.is_empty());
        }
        Command::Stats { manifest } => {
            let m = Manifest::load(&manifest)?;
            let s = collection_stats(&m);
            println!("books_done\t{}", s.books_done);
            println!("total_hours\t{}", s.total_hours);
        }
        Command::Serve {
            config,
            library,
            data,
            bind,
        } => {
            let mut cfg = match config {
                Some(p) => ServiceConfig::load(&p).map_err(Failure::Usage)?,
                None => ServiceConfig::default(),
            };
            if let Some(v) = library {
                cfg.library = v;
            }
            if let Some(v) = data {
                cfg.data_dir = v;
            }
            if let Some(v) = bind {
                cfg.bind = v;
            }
            audiobook_service::run_blocking(cfg).map_err(runtime)?;
        }
    }
    Ok(false)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}

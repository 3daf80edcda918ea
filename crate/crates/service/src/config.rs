use std::fs;
use std::path::{Path, PathBuf};

use audiobook_core::orchestrator::{BackendConfig, SsmlDialect};
use audiobook_core::script::ScriptOptions;
use audiobook_core::synthesis::{DEFAULT_SAMPLE_RATE, SUPPORTED_SAMPLE_RATES};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// Output root of a pipeline build: manifest plus per-book scripts.
    pub library: PathBuf,
    /// Jobs, enrolled voices and artifacts live here.
    pub data_dir: PathBuf,
    pub bind: String,
    pub job_workers: usize,
    /// Most jobs waiting to start; further submissions get 503.
    pub queue_cap: usize,
    /// Concurrent previews; further requests get 429.
    pub preview_limit: usize,
    pub default_preview_sentences: usize,
    pub cors_origins: Vec<String>,
    pub sample_rate_hz: u32,
    pub builtin_voices: Vec<String>,
    pub backend: BackendConfig,
    pub ssml: SsmlDialect,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let s = ScriptOptions::default();
        let mut voices = vec![s.narrator_voice];
        voices.extend(s.voice_pool);
        ServiceConfig {
            library: PathBuf::from("out"),
            data_dir: PathBuf::from("service-data"),
            bind: "127.0.0.1:8080".into(),
            job_workers: 2,
            queue_cap: 64,
            preview_limit: 4,
            default_preview_sentences: 5,
            cors_origins: vec!["http://localhost:5173".into()],
            sample_rate_hz: DEFAULT_SAMPLE_RATE,
            builtin_voices: voices,
            backend: BackendConfig::default(),
            ssml: SsmlDialect::default(),
        }
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<ServiceConfig, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg: ServiceConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.library, &mut cfg.data_dir] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.job_workers == 0 || self.preview_limit == 0 || self.queue_cap == 0 {
            return Err("job_workers, queue_cap and preview_limit must be at least 1".into());
        }
        if !SUPPORTED_SAMPLE_RATES.contains(&self.sample_rate_hz) {
            return Err(format!("sample_rate_hz must be one of {SUPPORTED_SAMPLE_RATES:?}"));
        }
        if self.default_preview_sentences == 0 {
            return Err("default_preview_sentences must be at least 1".into());
        }
        Ok(())
    }
}

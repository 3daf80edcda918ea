use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::OrchestratorError;
use crate::cluster::DEFAULT_K;
use crate::features::{DEFAULT_MAX_TERMS, DEFAULT_MIN_DF};
use crate::normalize::RuleSet;
use crate::script::{Emotion, ScriptOptions, SsmlOptions, DEFAULT_QUOTE_PAIRS};
use crate::synthesis::{RemoteBackend, SynthesisBackend, DeterministicBackend, DEFAULT_SAMPLE_RATE, MAX_RATE, MIN_RATE, SUPPORTED_SAMPLE_RATES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Features,
    Cluster,
    Normalize,
    Script,
    Audio,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Features, Stage::Cluster, Stage::Normalize, Stage::Script, Stage::Audio];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoiceConfig {
    pub narrator_voice: String,
    pub voice_pool: Vec<String>,
    /// Global rate multiplier.
    pub rate: f64,
    /// Global pitch offset, semitones.
    pub pitch: f64,
}

impl Default for VoiceConfig {
    fn default() -> Self {
        let s = ScriptOptions::default();
        VoiceConfig {
            narrator_voice: s.narrator_voice,
            voice_pool: s.voice_pool,
            rate: 1.0,
            pitch: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Deterministic,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    /// Bearer token. Never part of the config fingerprint.
    pub token: Option<String>,
    /// Environment variable to read the token from when `token` is unset.
    pub token_env: Option<String>,
}

impl BackendConfig {
    pub fn build(&self) -> Result<Box<dyn SynthesisBackend>, OrchestratorError> {
        match self.kind {
            BackendKind::Deterministic => Ok(Box::new(DeterministicBackend)),
            BackendKind::Remote => {
                let endpoint = self
                    .endpoint
                    .as_deref()
                    .ok_or_else(|| OrchestratorError::ConfigInvalid("remote backend needs an endpoint".into()))?;
                let token = match (&self.token, &self.token_env) {
                    (Some(t), _) => t.clone(),
                    (None, Some(var)) => std::env::var(var).map_err(|_| {
                        OrchestratorError::ConfigInvalid(format!("environment variable {var} is not set"))
                    })?,
                    (None, None) => String::new(),
                };
                Ok(Box::new(RemoteBackend::new(endpoint, &token)))
            }
        }
    }
}

/// SSML dialect settings; rate and pitch come from `[voices]`, language
/// from each book.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsmlDialect {
    pub style_element: String,
    pub style_attribute: String,
    pub namespaces: BTreeMap<String, String>,
    pub emotion_styles: BTreeMap<Emotion, String>,
}

impl Default for SsmlDialect {
    fn default() -> Self {
        let d = SsmlOptions::default();
        SsmlDialect {
            style_element: d.style_element,
            style_attribute: d.style_attribute,
            namespaces: d.namespaces,
            emotion_styles: d.emotion_styles,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub corpus_root: PathBuf,
    pub output_root: PathBuf,
    pub k: usize,
    pub seed: u64,
    /// k-means restarts (seeds `seed .. seed + restarts`), best inertia kept.
    pub restarts: usize,
    pub min_df: usize,
    pub max_terms: usize,
    /// Cluster id (as a string key) to rule set id.
    pub keep_list: BTreeMap<String, String>,
    /// Extra rule set files by id; `std-v1` is built in.
    pub rulesets: BTreeMap<String, PathBuf>,
    pub worker_count: usize,
    pub stages: Vec<Stage>,
    pub sample_rate_hz: u32,
    pub quote_pairs: Vec<(char, char)>,
    pub voices: VoiceConfig,
    pub backend: BackendConfig,
    pub ssml: SsmlDialect,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus_root: PathBuf::from("corpus"),
            output_root: PathBuf::from("out"),
            k: DEFAULT_K,
            seed: 42,
            restarts: 10,
            min_df: DEFAULT_MIN_DF,
            max_terms: DEFAULT_MAX_TERMS,
            keep_list: BTreeMap::new(),
            rulesets: BTreeMap::new(),
            worker_count: 1,
            stages: Stage::ALL.to_vec(),
            sample_rate_hz: DEFAULT_SAMPLE_RATE,
            quote_pairs: DEFAULT_QUOTE_PAIRS.to_vec(),
            voices: VoiceConfig::default(),
            backend: BackendConfig::default(),
            ssml: SsmlDialect::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<PipelineConfig, OrchestratorError> {
        toml::from_str(text).map_err(|e| OrchestratorError::ConfigInvalid(e.to_string()))
    }

    /// Loads a config file. Relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<PipelineConfig, OrchestratorError> {
        let text = fs::read_to_string(path)
            .map_err(|e| OrchestratorError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        let mut cfg = PipelineConfig::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.corpus_root);
        fix(&mut cfg.output_root);
        cfg.rulesets.values_mut().for_each(fix);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn has_stage(&self, stage: Stage) -> bool {
        self.stages.contains(&stage)
    }

    /// Keep-list with numeric cluster ids.
    pub fn keep_table(&self) -> Result<BTreeMap<usize, String>, OrchestratorError> {
        self.keep_list
            .iter()
            .map(|(k, v)| {
                k.trim()
                    .parse::<usize>()
                    .map(|id| (id, v.clone()))
                    .map_err(|_| OrchestratorError::ConfigInvalid(format!("keep_list key {k:?} is not a cluster id")))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: String| Err(OrchestratorError::ConfigInvalid(m));
        if self.worker_count < 1 {
            return bad("worker_count must be at least 1".into());
        }
        if self.stages.is_empty() || self.stages[..] != Stage::ALL[..self.stages.len()] {
            return bad(format!(
                "stages must be a non-empty prefix of {:?}, got {:?}",
                Stage::ALL,
                self.stages
            ));
        }
        if self.k < 1 {
            return bad("k must be at least 1".into());
        }
        if self.restarts < 1 {
            return bad("restarts must be at least 1".into());
        }
        if self.min_df < 1 || self.max_terms < 1 {
            return bad("min_df and max_terms must be at least 1".into());
        }
        if !SUPPORTED_SAMPLE_RATES.contains(&self.sample_rate_hz) {
            return bad(format!("sample_rate_hz must be one of {SUPPORTED_SAMPLE_RATES:?}"));
        }
        if self.voices.voice_pool.is_empty() {
            return bad("voices.voice_pool must not be empty".into());
        }
        if !(MIN_RATE..=MAX_RATE).contains(&self.voices.rate) {
            return bad(format!("voices.rate must lie in [{MIN_RATE}, {MAX_RATE}]"));
        }
        if self.quote_pairs.is_empty() {
            return bad("quote_pairs must not be empty".into());
        }
        for id in self.keep_table()?.values() {
            if id != "std-v1" && !self.rulesets.contains_key(id) {
                return bad(format!("keep_list names unknown rule set {id:?}"));
            }
        }
        if self.backend.kind == BackendKind::Remote && self.backend.endpoint.is_none() {
            return bad("remote backend needs an endpoint".into());
        }
        Ok(())
    }

    /// Built-in `std-v1` plus every configured rule set file.
    pub fn load_rulesets(&self) -> Result<BTreeMap<String, RuleSet>, OrchestratorError> {
        let mut out = BTreeMap::new();
        out.insert("std-v1".to_string(), RuleSet::std_v1());
        for (id, path) in &self.rulesets {
            let rs = RuleSet::load(path).map_err(|e| OrchestratorError::ConfigInvalid(format!("{id}: {e}")))?;
            out.insert(id.clone(), rs);
        }
        Ok(out)
    }

    pub fn script_options(&self) -> ScriptOptions {
        ScriptOptions {
            quote_pairs: self.quote_pairs.clone(),
            narrator_voice: self.voices.narrator_voice.clone(),
            voice_pool: self.voices.voice_pool.clone(),
        }
    }

    pub fn ssml_options(&self, lang: &str) -> SsmlOptions {
        SsmlOptions {
            rate: self.voices.rate,
            pitch: self.voices.pitch,
            lang: if lang.is_empty() { "en".to_string() } else { lang.to_string() },
            style_element: self.ssml.style_element.clone(),
            style_attribute: self.ssml.style_attribute.clone(),
            namespaces: self.ssml.namespaces.clone(),
            emotion_styles: self.ssml.emotion_styles.clone(),
        }
    }

    /// SHA-256 over the canonical JSON of every setting that affects
    /// outputs. Paths, worker count and credentials are left out; rule set
    /// files contribute their contents.
    pub fn fingerprint(&self) -> Result<String, OrchestratorError> {
        let mut value = serde_json::to_value(self).expect("config serializes");
        let obj = value.as_object_mut().expect("config is an object");
        for key in ["corpus_root", "output_root", "worker_count", "rulesets"] {
            obj.remove(key);
        }
        if let Some(backend) = obj.get_mut("backend").and_then(|b| b.as_object_mut()) {
            backend.remove("token");
            backend.remove("token_env");
        }
        let mut rulesets = serde_json::Map::new();
        for (id, path) in &self.rulesets {
            let bytes = fs::read(path)
                .map_err(|e| OrchestratorError::ConfigInvalid(format!("rule set {id} ({}): {e}", path.display())))?;
            rulesets.insert(id.clone(), serde_json::Value::String(hex(&Sha256::digest(&bytes))));
        }
        obj.insert("rulesets".into(), serde_json::Value::Object(rulesets));
        let canonical = serde_json::to_string(&value).expect("json");
        Ok(hex(&Sha256::digest(canonical.as_bytes())))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = PipelineConfig::default();
        let back = PipelineConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_toml("k = 3\nbogus = 1\n").is_err());
        assert!(PipelineConfig::from_toml("[voices]\nnarrator = \"x\"\n").is_err());
    }

    #[test]
    fn validation() {
        let mut c = PipelineConfig::default();
        c.stages = vec![Stage::Features, Stage::Normalize];
        assert!(c.validate().is_err());
        c.stages = vec![];
        assert!(c.validate().is_err());
        c.stages = vec![Stage::Features, Stage::Cluster];
        assert!(c.validate().is_ok());
        c.worker_count = 0;
        assert!(c.validate().is_err());
        c.worker_count = 2;
        c.keep_list.insert("x".into(), "std-v1".into());
        assert!(c.validate().is_err());
        c.keep_list.clear();
        c.keep_list.insert("1".into(), "nope".into());
        assert!(c.validate().is_err());
    }

    #[test]
    fn fingerprint_ignores_paths_workers_and_tokens() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.corpus_root = "/elsewhere".into();
        b.output_root = "/tmp/x".into();
        b.worker_count = 8;
        b.backend.token = Some("secret".into());
        assert_eq!(a.fingerprint().unwrap(), b.fingerprint().unwrap());
        b.k = 3;
        assert_ne!(a.fingerprint().unwrap(), b.fingerprint().unwrap());
        assert_eq!(a.fingerprint().unwrap().len(), 64);
    }
}

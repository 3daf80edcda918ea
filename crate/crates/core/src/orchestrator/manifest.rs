//! The per-book build record.
//!
//! `manifest.v1` is JSON lines: a header line, one line per book in
//! book_id order, then a `--- timestamps` marker and one line of run times.
//! Everything above the marker is a pure function of config and corpus.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::normalize::RemovalReport;
use crate::synthesis::write_atomic;

pub const MANIFEST_FORMAT: &str = "manifest v1";
pub const MANIFEST_FILE: &str = "manifest.v1";
pub const TIMESTAMP_MARKER: &str = "--- timestamps";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BookStatus {
    Done,
    Excluded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemovalSummary {
    pub characters_removed: usize,
    pub characters_kept: usize,
    pub start_marker_found: bool,
    pub end_marker_found: bool,
    pub boilerplate_nodes: usize,
    /// Rule name to matched subtrees removed.
    pub rules: BTreeMap<String, usize>,
    pub passes: usize,
}

impl From<&RemovalReport> for RemovalSummary {
    fn from(r: &RemovalReport) -> Self {
        RemovalSummary {
            characters_removed: r.characters_removed,
            characters_kept: r.characters_kept,
            start_marker_found: r.boilerplate.start_marker_found,
            end_marker_found: r.boilerplate.end_marker_found,
            boilerplate_nodes: r.boilerplate.nodes_removed,
            rules: r.rules.iter().map(|c| (c.rule.clone(), c.nodes_removed)).collect(),
            passes: r.passes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub book_id: String,
    pub status: BookStatus,
    pub title: String,
    pub author: String,
    pub cluster_id: Option<usize>,
    pub ruleset_id: Option<String>,
    pub removal: Option<RemovalSummary>,
    pub chapter_count: usize,
    pub audio_duration_ms: u64,
    /// Relative to the output root.
    pub outputs: Vec<String>,
    pub error: Option<String>,
}

impl ManifestEntry {
    pub fn new(book_id: &str) -> ManifestEntry {
        ManifestEntry {
            book_id: book_id.to_string(),
            status: BookStatus::Failed,
            title: String::new(),
            author: String::new(),
            cluster_id: None,
            ruleset_id: None,
            removal: None,
            chapter_count: 0,
            audio_duration_ms: 0,
            outputs: Vec::new(),
            error: None,
        }
    }

    pub fn failed(mut self, error: impl Into<String>) -> ManifestEntry {
        self.status = BookStatus::Failed;
        self.error = Some(error.into());
        self
    }

    /// Whether every recorded output exists under `root`.
    pub fn outputs_present(&self, root: &Path) -> bool {
        self.outputs.iter().all(|p| root.join(p).is_file())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format: String,
    pub fingerprint: String,
    /// False while a run is in progress.
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Timestamps {
    pub started: String,
    pub finished: String,
    /// `run` or `resume`.
    pub mode: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub entries: Vec<ManifestEntry>,
    pub timestamps: Timestamps,
}

impl Manifest {
    pub fn new(fingerprint: &str) -> Manifest {
        Manifest {
            header: ManifestHeader {
                format: MANIFEST_FORMAT.to_string(),
                fingerprint: fingerprint.to_string(),
                complete: false,
            },
            entries: Vec::new(),
            timestamps: Timestamps::default(),
        }
    }

    pub fn entry(&self, book_id: &str) -> Option<&ManifestEntry> {
        self.entries
            .binary_search_by(|e| e.book_id.as_str().cmp(book_id))
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn sort(&mut self) {
        self.entries.sort_by(|a, b| a.book_id.cmp(&b.book_id));
    }

    /// The part above the timestamp marker.
    pub fn body(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("json");
        out.push('\n');
        let mut entries: Vec<&ManifestEntry> = self.entries.iter().collect();
        entries.sort_by(|a, b| a.book_id.cmp(&b.book_id));
        for e in entries {
            out.push_str(&serde_json::to_string(e).expect("json"));
            out.push('\n');
        }
        out
    }

    pub fn serialize(&self) -> String {
        let mut out = self.body();
        out.push_str(TIMESTAMP_MARKER);
        out.push('\n');
        out.push_str(&serde_json::to_string(&self.timestamps).expect("json"));
        out.push('\n');
        out
    }

    pub fn parse(text: &str) -> Result<Manifest, OrchestratorError> {
        let bad = |line: usize, m: String| OrchestratorError::ManifestInvalid(format!("line {line}: {m}"));
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, first) = lines.next().ok_or_else(|| bad(1, "empty manifest".into()))?;
        let header: ManifestHeader = serde_json::from_str(first).map_err(|e| bad(1, e.to_string()))?;
        if header.format != MANIFEST_FORMAT {
            return Err(bad(1, format!("unsupported format {:?}", header.format)));
        }
        let mut entries: Vec<ManifestEntry> = Vec::new();
        let mut timestamps = None;
        while let Some((n, line)) = lines.next() {
            if line == TIMESTAMP_MARKER {
                let (n, ts) = lines.next().ok_or_else(|| bad(n + 1, "missing timestamps".into()))?;
                timestamps = Some(serde_json::from_str(ts).map_err(|e| bad(n, e.to_string()))?);
                if let Some((n, _)) = lines.next() {
                    return Err(bad(n, "trailing content".into()));
                }
                break;
            }
            let e: ManifestEntry = serde_json::from_str(line).map_err(|e| bad(n, e.to_string()))?;
            if entries.last().is_some_and(|prev| prev.book_id >= e.book_id) {
                return Err(bad(n, format!("entry {} out of order", e.book_id)));
            }
            entries.push(e);
        }
        Ok(Manifest {
            header,
            entries,
            timestamps: timestamps.ok_or_else(|| bad(0, "missing timestamp section".into()))?,
        })
    }

    pub fn load(path: &Path) -> Result<Manifest, OrchestratorError> {
        let text = fs::read_to_string(path)
            .map_err(|e| OrchestratorError::ManifestInvalid(format!("{}: {e}", path.display())))?;
        Manifest::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<(), OrchestratorError> {
        write_atomic(path, self.serialize().as_bytes()).map_err(|e| OrchestratorError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CollectionStats {
    pub books_done: usize,
    pub total_hours: f64,
}

pub fn collection_stats(manifest: &Manifest) -> CollectionStats {
    let done = manifest.entries.iter().filter(|e| e.status == BookStatus::Done);
    let (books_done, ms) = done.fold((0usize, 0u64), |(n, ms), e| (n + 1, ms + e.audio_duration_ms));
    CollectionStats {
        books_done,
        total_hours: ms as f64 / 3_600_000.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn done(id: &str, ms: u64) -> ManifestEntry {
        let mut e = ManifestEntry::new(id);
        e.status = BookStatus::Done;
        e.audio_duration_ms = ms;
        e
    }

    #[test]
    fn stats_examples() {
        let mut m = Manifest::new("f");
        assert_eq!(collection_stats(&m), CollectionStats { books_done: 0, total_hours: 0.0 });
        m.entries = vec![done("a", 1_800_000), done("b", 1_800_000), ManifestEntry::new("c").failed("x")];
        assert_eq!(collection_stats(&m), CollectionStats { books_done: 2, total_hours: 1.0 });
    }

    #[test]
    fn round_trip_and_sorted_output() {
        let mut m = Manifest::new("abc");
        m.entries = vec![done("b", 5), done("a", 7)];
        m.timestamps.mode = "run".into();
        let text = m.serialize();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[1].contains("\"book_id\":\"a\""));
        assert_eq!(lines[3], TIMESTAMP_MARKER);
        m.sort();
        assert_eq!(Manifest::parse(&text).unwrap(), m);
    }

    #[test]
    fn rejects_damage() {
        let mut m = Manifest::new("abc");
        m.entries = vec![done("a", 1)];
        let text = m.serialize();
        assert!(Manifest::parse(&text[..text.len() / 2]).is_err());
        assert!(Manifest::parse("").is_err());
        let swapped = text.replace("manifest v1", "manifest v9");
        assert!(Manifest::parse(&swapped).is_err());
    }
}

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use audiobook_core::orchestrator::{BookStatus, Manifest, ManifestEntry, MANIFEST_FILE, SCRIPT_FILE};
use audiobook_core::script::NarrationScript;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BookSummary {
    pub book_id: String,
    pub title: String,
    pub author: String,
    pub chapter_count: usize,
    pub cluster_id: Option<usize>,
    /// Mapped to a rule set and built; only eligible books take previews
    /// and jobs.
    pub eligible: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChapterInfo {
    pub index: usize,
    pub heading: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BookDetail {
    #[serde(flatten)]
    pub summary: BookSummary,
    pub chapters: Vec<ChapterInfo>,
}

/// Books of one pipeline build, keyed by id.
#[derive(Debug, Clone, Default)]
pub struct BookIndex {
    books: BTreeMap<String, BookSummary>,
    root: PathBuf,
}

impl BookIndex {
    pub fn from_entries(root: &Path, entries: &[ManifestEntry]) -> BookIndex {
        let books = entries
            .iter()
            .map(|e| {
                let summary = BookSummary {
                    book_id: e.book_id.clone(),
                    title: e.title.clone(),
                    author: e.author.clone(),
                    chapter_count: e.chapter_count,
                    cluster_id: e.cluster_id,
                    eligible: e.status == BookStatus::Done && e.ruleset_id.is_some(),
                };
                (e.book_id.clone(), summary)
            })
            .collect();
        BookIndex {
            books,
            root: root.to_path_buf(),
        }
    }

    /// Reads `<library>/manifest.v1`.
    pub fn load(library: &Path) -> Result<BookIndex, String> {
        let manifest = Manifest::load(&library.join(MANIFEST_FILE)).map_err(|e| e.to_string())?;
        Ok(BookIndex::from_entries(library, &manifest.entries))
    }

    pub fn len(&self) -> usize {
        self.books.len()
    }

    pub fn is_empty(&self) -> bool {
        self.books.is_empty()
    }

    pub fn get(&self, book_id: &str) -> Option<&BookSummary> {
        self.books.get(book_id)
    }

    pub fn script_path(&self, book_id: &str) -> PathBuf {
        self.root.join(book_id).join(SCRIPT_FILE)
    }

    pub fn script(&self, book_id: &str) -> Result<NarrationScript, String> {
        let path = self.script_path(book_id);
        let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        NarrationScript::from_json(&text).map_err(|e| e.to_string())
    }

    /// Case-insensitive substring match on title and author. Ranked by
    /// matching fields (more first), then shorter title, then book id. An
    /// empty query lists books by id.
    pub fn search(&self, query: &str, limit: usize) -> Vec<BookSummary> {
        let q = query.trim().to_lowercase();
        if q.is_empty() {
            return self.books.values().take(limit).cloned().collect();
        }
        let mut hits: Vec<(usize, usize, &BookSummary)> = self
            .books
            .values()
            .filter_map(|b| {
                let fields = [&b.title, &b.author]
                    .iter()
                    .filter(|f| f.to_lowercase().contains(&q))
                    .count();
                (fields > 0).then(|| (fields, b.title.chars().count(), b))
            })
            .collect();
        hits.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.book_id.cmp(&b.2.book_id)));
        hits.into_iter().take(limit).map(|(_, _, b)| b.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, title: &str, author: &str) -> ManifestEntry {
        let mut e = ManifestEntry::new(id);
        e.status = BookStatus::Done;
        e.title = title.into();
        e.author = author.into();
        e.ruleset_id = Some("std-v1".into());
        e
    }

    fn ids(v: &[BookSummary]) -> Vec<&str> {
        v.iter().map(|b| b.book_id.as_str()).collect()
    }

    #[test]
    fn search_examples() {
        let idx = BookIndex::from_entries(
            Path::new("/lib"),
            &[entry("b2", "Moby Dick", "Herman Melville"), entry("b1", "Alice in Wonderland", "Lewis Carroll")],
        );
        assert_eq!(ids(&idx.search("alice", 10)), ["b1"]);
        assert_eq!(ids(&idx.search("", 1)), ["b1"]);
        assert!(idx.search("zebra", 10).is_empty());
    }

    #[test]
    fn ranking_order() {
        let idx = BookIndex::from_entries(
            Path::new("/lib"),
            &[
                entry("c", "Sea Stories", "Ann Sea"),
                entry("a", "The Long Sea Voyage", "Bo"),
                entry("b", "Sea Air", "Cy"),
                entry("d", "Sea Air", "Di"),
            ],
        );
        // two fields first, then by title length, then id
        assert_eq!(ids(&idx.search("SEA", 10)), ["c", "b", "d", "a"]);
    }
}

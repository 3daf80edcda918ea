//! Corpus discovery and charset-aware loading of HTML e-books.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::bytes::Regex as BytesRegex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dom::parse_html;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{0} is not a directory")]
    NotADirectory(PathBuf),
    #[error("permission denied reading {0}")]
    PermissionDenied(PathBuf),
    #[error("duplicate book id {id:?}: {first} and {second}")]
    DuplicateBookId {
        id: String,
        first: PathBuf,
        second: PathBuf,
    },
    #[error("file stem of {0} is not a valid book id (allowed: A-Z a-z 0-9 _ -)")]
    InvalidBookId(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0} ends in a truncated utf-8 sequence")]
    UndecodableBytes(PathBuf),
}

fn io_error(path: &Path, source: io::Error) -> IngestError {
    if source.kind() == io::ErrorKind::PermissionDenied {
        IngestError::PermissionDenied(path.to_path_buf())
    } else {
        IngestError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EbookRef {
    pub book_id: String,
    pub path: PathBuf,
    pub size_bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Encoding {
    #[serde(rename = "utf-8")]
    Utf8,
    #[serde(rename = "latin-1")]
    Latin1,
    #[serde(rename = "windows-1252")]
    Windows1252,
}

impl Encoding {
    pub fn label(self) -> &'static str {
        match self {
            Encoding::Utf8 => "utf-8",
            Encoding::Latin1 => "latin-1",
            Encoding::Windows1252 => "windows-1252",
        }
    }

    fn from_declared(label: &str) -> Option<Self> {
        match label.to_ascii_lowercase().as_str() {
            "utf-8" | "utf8" | "us-ascii" | "ascii" => Some(Encoding::Utf8),
            "iso-8859-1" | "iso8859-1" | "latin-1" | "latin1" | "l1" => Some(Encoding::Latin1),
            "windows-1252" | "cp1252" | "x-cp1252" => Some(Encoding::Windows1252),
            _ => None,
        }
    }
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Title, author and language, always present (possibly empty).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metadata {
    pub title: String,
    pub author: String,
    pub language: String,
}

impl Metadata {
    pub fn as_map(&self) -> BTreeMap<&'static str, &str> {
        BTreeMap::from([
            ("title", self.title.as_str()),
            ("author", self.author.as_str()),
            ("language", self.language.as_str()),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EbookDocument {
    pub book_id: String,
    pub raw_html: String,
    pub source_encoding: Encoding,
    pub metadata: Metadata,
}

fn is_valid_book_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn is_html_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("html") || e.eq_ignore_ascii_case("htm"))
}

/// Recursively lists `*.html` / `*.htm` files under `root`, sorted by book id.
pub fn scan_corpus(root: &Path) -> Result<Vec<EbookRef>, IngestError> {
    let meta = fs::metadata(root).map_err(|e| io_error(root, e))?;
    if !meta.is_dir() {
        return Err(IngestError::NotADirectory(root.to_path_buf()));
    }
    let mut found: BTreeMap<String, EbookRef> = BTreeMap::new();
    let mut pending = vec![root.to_path_buf()];
    while let Some(dir) = pending.pop() {
        let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| io_error(&dir, e))?
            .map(|entry| entry.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(|e| io_error(&dir, e))?;
        entries.sort();
        for path in entries {
            let ft = fs::metadata(&path).map_err(|e| io_error(&path, e))?;
            if ft.is_dir() {
                pending.push(path);
                continue;
            }
            if !is_html_file(&path) {
                continue;
            }
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("")
                .to_string();
            if !is_valid_book_id(&stem) {
                return Err(IngestError::InvalidBookId(path));
            }
            if let Some(existing) = found.get(&stem) {
                let (first, second) = if existing.path < path {
                    (existing.path.clone(), path)
                } else {
                    (path, existing.path.clone())
                };
                return Err(IngestError::DuplicateBookId {
                    id: stem,
                    first,
                    second,
                });
            }
            found.insert(
                stem.clone(),
                EbookRef {
                    book_id: stem,
                    size_bytes: ft.len(),
                    path,
                },
            );
        }
    }
    Ok(found.into_values().collect())
}

static META_CHARSET: LazyLock<BytesRegex> = LazyLock::new(|| {
    BytesRegex::new(r#"(?i)<meta\b[^>]*?\bcharset\s*=\s*["']?\s*([A-Za-z0-9_:.\-]+)"#)
        .expect("valid regex")
});

/// Declared `<meta>` charset when supported, else utf-8 when the bytes are
/// valid utf-8, else windows-1252.
pub fn detect_encoding(bytes: &[u8]) -> Encoding {
    let declared = META_CHARSET
        .captures(bytes)
        .and_then(|c| std::str::from_utf8(&c[1]).ok().and_then(Encoding::from_declared));
    if let Some(enc) = declared {
        return enc;
    }
    if std::str::from_utf8(bytes).is_ok() {
        Encoding::Utf8
    } else {
        Encoding::Windows1252
    }
}

fn decode(bytes: &[u8], encoding: Encoding, path: &Path) -> Result<String, IngestError> {
    match encoding {
        Encoding::Utf8 => match std::str::from_utf8(bytes) {
            Ok(s) => Ok(s.to_string()),
            Err(e) if e.error_len().is_none() => Err(IngestError::UndecodableBytes(path.to_path_buf())),
            Err(_) => Ok(String::from_utf8_lossy(bytes).into_owned()),
        },
        Encoding::Latin1 => Ok(bytes.iter().map(|&b| char::from(b)).collect()),
        Encoding::Windows1252 => {
            let (text, _) = encoding_rs::WINDOWS_1252.decode_without_bom_handling(bytes);
            Ok(text.into_owned())
        }
    }
}

/// Splits a `<title>` on " by " when that token occurs exactly once.
fn split_title(title: &str) -> (String, String) {
    let parts: Vec<&str> = title.split(" by ").collect();
    if parts.len() == 2 {
        (parts[0].trim().to_string(), parts[1].trim().to_string())
    } else {
        (title.to_string(), String::new())
    }
}

pub fn extract_metadata(html: &str) -> Metadata {
    let tree = parse_html(html);
    let title = tree
        .find_tag("title")
        .map(|n| tree.text_content(n.id))
        .unwrap_or_default();
    let (title, author) = split_title(&title);
    let language = tree
        .find_tag("html")
        .and_then(|n| n.element())
        .and_then(|e| e.attr("lang").or_else(|| e.attr("xml:lang")))
        .map(|l| l.trim().to_string())
        .unwrap_or_default();
    Metadata {
        title,
        author,
        language,
    }
}

pub fn load_ebook(ebook: &EbookRef) -> Result<EbookDocument, IngestError> {
    let bytes = fs::read(&ebook.path).map_err(|e| io_error(&ebook.path, e))?;
    let source_encoding = detect_encoding(&bytes);
    let raw_html = decode(&bytes, source_encoding, &ebook.path)?;
    let metadata = extract_metadata(&raw_html);
    Ok(EbookDocument {
        book_id: ebook.book_id.clone(),
        raw_html,
        source_encoding,
        metadata,
    })
}

//! Slow, obvious reimplementations used to cross-check the pipeline, plus
//! readers for the hand-annotated fixtures.

use std::collections::BTreeMap;
use std::path::PathBuf;

use audiobook_core::script::{Segment, SegmentKind, NARRATOR};

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .expect("workspace root")
}

pub fn fixtures_dir() -> PathBuf {
    workspace_root().join("fixtures")
}

/// Vocabulary and per-document weights, keyed by term.
#[derive(Debug, Clone, PartialEq)]
pub struct TfidfReference {
    pub terms: Vec<String>,
    pub weights: Vec<BTreeMap<String, f64>>,
}

fn occurrences(doc: &[String], term: &str) -> usize {
    doc.iter().filter(|t| t.as_str() == term).count()
}

/// TF-IDF by direct counting. Term selection picks the highest document
/// frequency one term at a time, lexicographically smallest on ties.
pub fn tfidf_reference(docs: &[Vec<String>], min_df: usize, max_terms: usize) -> TfidfReference {
    let n = docs.len() as f64;
    let mut distinct: Vec<&String> = docs.iter().flatten().collect();
    distinct.sort();
    distinct.dedup();
    let mut pool: Vec<(String, usize)> = distinct
        .into_iter()
        .map(|t| (t.clone(), docs.iter().filter(|d| occurrences(d, t) > 0).count()))
        .filter(|&(_, df)| df >= min_df.max(1))
        .collect();

    let mut chosen = Vec::new();
    while chosen.len() < max_terms && !pool.is_empty() {
        let mut best = 0;
        for i in 1..pool.len() {
            let (t, df) = &pool[i];
            let (bt, bdf) = &pool[best];
            if df > bdf || (df == bdf && t < bt) {
                best = i;
            }
        }
        chosen.push(pool.remove(best));
    }
    chosen.sort();

    let weights = docs
        .iter()
        .map(|doc| {
            let mut w = BTreeMap::new();
            for (term, df) in &chosen {
                let count = occurrences(doc, term);
                if count > 0 {
                    let tf = count as f64 / doc.len() as f64;
                    let idf = (n / (1.0 + *df as f64)).ln() + 1.0;
                    w.insert(term.clone(), tf * idf);
                }
            }
            let norm: f64 = w.values().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                w.values_mut().for_each(|x| *x /= norm);
            }
            w
        })
        .collect();
    TfidfReference {
        terms: chosen.into_iter().map(|(t, _)| t).collect(),
        weights,
    }
}

/// Within-cluster sum of squares for a labelling.
pub fn partition_inertia(points: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let dim = points.first().map_or(0, Vec::len);
    let mut total = 0.0;
    for c in 0..k {
        let members: Vec<&Vec<f64>> = points.iter().zip(labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
        if members.is_empty() {
            continue;
        }
        let mean: Vec<f64> = (0..dim)
            .map(|d| members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64)
            .collect();
        for p in members {
            total += p.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
    }
    total
}

/// Lowest inertia over every partition into exactly `k` non-empty groups.
/// Tries all `k^n` labellings, so keep `n` small.
pub fn optimal_inertia(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    assert!(k >= 1 && k <= n, "need 1 <= k <= n");
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        if (0..k).all(|c| labels.contains(&c)) {
            best = best.min(partition_inertia(points, &labels, k));
        }
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
    }
}

/// Named point sets from `fixtures/kmeans`.
pub fn parse_point_sets(text: &str) -> Result<Vec<(String, Vec<Vec<f64>>)>, String> {
    let mut sets: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if let Some(name) = line.strip_prefix("## ") {
            sets.push((name.trim().to_string(), Vec::new()));
        } else if line.is_empty() || line.starts_with('#') {
            continue;
        } else {
            let point = line
                .split_whitespace()
                .map(|x| x.parse::<f64>().map_err(|e| format!("line {}: {e}", n + 1)))
                .collect::<Result<Vec<_>, _>>()?;
            let (_, pts) = sets.last_mut().ok_or_else(|| format!("line {}: point before any set", n + 1))?;
            if pts.first().is_some_and(|p| p.len() != point.len()) {
                return Err(format!("line {}: dimension changes within a set", n + 1));
            }
            pts.push(point);
        }
    }
    Ok(sets)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldSegment {
    pub kind: SegmentKind,
    pub speaker: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldParagraph {
    pub text: String,
    pub segments: Vec<GoldSegment>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldChapter {
    pub heading: String,
    pub paragraphs: Vec<GoldParagraph>,
}

/// Reads the annotated dialogue format (see docs/script-format.md).
pub fn parse_gold(text: &str) -> Result<Vec<GoldChapter>, String> {
    let mut chapters: Vec<GoldChapter> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let err = |m: &str| format!("line {}: {m}", n + 1);
        if raw.trim().is_empty() {
            continue;
        }
        if let Some(h) = raw.strip_prefix("## ") {
            chapters.push(GoldChapter {
                heading: h.trim().to_string(),
                paragraphs: Vec::new(),
            });
        } else if raw.starts_with('#') {
            continue;
        } else if let Some(p) = raw.strip_prefix("> ") {
            if chapters.is_empty() {
                chapters.push(GoldChapter {
                    heading: String::new(),
                    paragraphs: Vec::new(),
                });
            }
            chapters.last_mut().unwrap().paragraphs.push(GoldParagraph {
                text: p.to_string(),
                segments: Vec::new(),
            });
        } else {
            let (label, body) = raw.split_once(" | ").ok_or_else(|| err("expected `N | text` or `D name | text`"))?;
            let seg = if label == "N" {
                GoldSegment {
                    kind: SegmentKind::Narration,
                    speaker: NARRATOR.to_string(),
                    text: body.to_string(),
                }
            } else if let Some(name) = label.strip_prefix("D ") {
                GoldSegment {
                    kind: SegmentKind::Dialogue,
                    speaker: name.trim().to_string(),
                    text: body.to_string(),
                }
            } else {
                return Err(err("segment label must be N or D <name>"));
            };
            let para = chapters
                .last_mut()
                .and_then(|c| c.paragraphs.last_mut())
                .ok_or_else(|| err("segment before any paragraph"))?;
            para.segments.push(seg);
        }
    }
    Ok(chapters)
}

/// Paragraph text rebuilt from segments: each segment's surface form is its
/// text with its quote characters (and any inner padding) put back, and
/// surfaces are joined by a single space where the segment records one.
pub fn reinsert_quotes(segments: &[Segment]) -> String {
    let surfaces: Vec<(bool, String)> = segments
        .iter()
        .map(|s| {
            let open = s.quote_open.map(String::from).unwrap_or_default();
            let close = s.quote_close.map(String::from).unwrap_or_default();
            let lpad = if s.pad_open { " " } else { "" };
            let rpad = if s.pad_close { " " } else { "" };
            (s.space_before, format!("{open}{lpad}{}{rpad}{close}", s.text))
        })
        .collect();
    let mut out = String::new();
    for (i, (space, surface)) in surfaces.iter().enumerate() {
        if i > 0 && *space {
            out += " ";
        }
        out += surface;
    }
    out
}

/// The 44-byte header of a PCM16 mono WAV holding `samples` samples,
/// spelled out field by field.
pub fn wav_header(samples: u32, sample_rate: u32) -> [u8; 44] {
    let data = samples * 2;
    let mut h = [0u8; 44];
    let fields: [(usize, &[u8]); 13] = [
        (0, b"RIFF"),
        (4, &(36 + data).to_le_bytes()),
        (8, b"WAVE"),
        (12, b"fmt "),
        (16, &[16, 0, 0, 0]),
        (20, &[1, 0]),
        (22, &[1, 0]),
        (24, &sample_rate.to_le_bytes()),
        (28, &(sample_rate * 2).to_le_bytes()),
        (32, &[2, 0]),
        (34, &[16, 0]),
        (36, b"data"),
        (40, &data.to_le_bytes()),
    ];
    for (at, bytes) in fields {
        h[at..at + bytes.len()].copy_from_slice(bytes);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(v: &[&[&str]]) -> Vec<Vec<String>> {
        v.iter().map(|d| d.iter().map(|s| s.to_string()).collect()).collect()
    }

    #[test]
    fn tfidf_hand_example() {
        // N = 2; "a" in both docs, "b" in one
        let r = tfidf_reference(&docs(&[&["a", "a", "b"], &["a"]]), 1, 10);
        assert_eq!(r.terms, ["a", "b"]);
        let idf_a = (2.0f64 / 3.0).ln() + 1.0;
        let idf_b = 1.0f64.ln() + 1.0;
        let (wa, wb) = (2.0 / 3.0 * idf_a, 1.0 / 3.0 * idf_b);
        let norm = (wa * wa + wb * wb).sqrt();
        assert!((r.weights[0]["a"] - wa / norm).abs() < 1e-15);
        assert!((r.weights[0]["b"] - wb / norm).abs() < 1e-15);
        assert!((r.weights[1]["a"] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tfidf_truncation_prefers_frequent_then_alphabetical() {
        let r = tfidf_reference(&docs(&[&["z", "y", "x"], &["z", "y"], &["z", "w"]]), 1, 2);
        assert_eq!(r.terms, ["y", "z"]);
        let r = tfidf_reference(&docs(&[&["b", "a"], &["c"]]), 1, 2);
        assert_eq!(r.terms, ["a", "b"]);
    }

    #[test]
    fn exhaustive_kmeans() {
        let pts: Vec<Vec<f64>> = [0.0, 1.0, 10.0, 11.0].iter().map(|&x| vec![x]).collect();
        assert_eq!(optimal_inertia(&pts, 2), 1.0);
        assert_eq!(optimal_inertia(&pts, 4), 0.0);
        assert_eq!(optimal_inertia(&pts, 1), 101.0);
    }

    #[test]
    fn gold_format() {
        let g = parse_gold("# c\n## One\n> “Hi,” said Al.\nD Al | Hi,\nN | said Al.\n\n> x\nN | x\n").unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].heading, "One");
        assert_eq!(g[0].paragraphs.len(), 2);
        assert_eq!(g[0].paragraphs[0].segments[0].speaker, "Al");
        assert!(parse_gold("N | orphan\n").is_err());
    }

    #[test]
    fn header_matches_known_bytes() {
        let h = wav_header(1, 8000);
        assert_eq!(
            h.to_vec(),
            [
                b"RIFF".as_slice(),
                &[38, 0, 0, 0],
                b"WAVEfmt ",
                &[16, 0, 0, 0, 1, 0, 1, 0, 0x40, 0x1f, 0, 0, 0x80, 0x3e, 0, 0, 2, 0, 16, 0],
                b"data",
                &[2, 0, 0, 0],
            ]
            .concat()
        );
    }
}

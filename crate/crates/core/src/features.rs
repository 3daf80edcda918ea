//! Structural featurization: TF-IDF over DOM tokens plus hand-crafted
//! layout statistics, combined into one dense vector per book.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::dom::DomTree;

pub const DEFAULT_MIN_DF: usize = 2;
pub const DEFAULT_MAX_TERMS: usize = 2000;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("cannot build a vocabulary from zero books")]
    EmptyCorpus,
    #[error("expected {expected} values, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// DOM component tokens: `t:<tag>`, `b:<parent>/<tag>` and `c:<tag>.<class>`
/// for every element in preorder.
pub fn dom_path_tokens(tree: &DomTree) -> Vec<String> {
    let mut tokens = Vec::new();
    for (node, el) in tree.elements() {
        let parent_tag = node
            .parent
            .and_then(|p| tree.node(p).tag())
            .unwrap_or("root");
        tokens.push(format!("t:{}", el.tag));
        tokens.push(format!("b:{}/{}", parent_tag, el.tag));
        for class in el.class_tokens() {
            tokens.push(format!("c:{}.{}", el.tag, class));
        }
    }
    tokens
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    /// Sorted lexicographically, no duplicates.
    pub terms: Vec<String>,
    /// Parallel to `terms`.
    pub doc_freq: Vec<usize>,
    pub corpus_size: usize,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.terms.binary_search_by(|t| t.as_str().cmp(term)).ok()
    }

    pub fn idf(&self, index: usize) -> f64 {
        (self.corpus_size as f64 / (1.0 + self.doc_freq[index] as f64)).ln() + 1.0
    }
}

/// Keeps terms with document frequency ≥ `min_df`; if more than `max_terms`
/// survive, keeps the most frequent (ties broken lexicographically).
pub fn build_vocabulary<S: AsRef<str>>(
    token_lists: &[Vec<S>],
    min_df: usize,
    max_terms: usize,
) -> Result<Vocabulary, FeatureError> {
    if token_lists.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for tokens in token_lists {
        let unique: BTreeSet<&str> = tokens.iter().map(AsRef::as_ref).collect();
        for t in unique {
            *df.entry(t).or_default() += 1;
        }
    }
    let mut kept: Vec<(&str, usize)> = df.into_iter().filter(|&(_, n)| n >= min_df.max(1)).collect();
    if kept.len() > max_terms {
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        kept.truncate(max_terms);
        kept.sort_by(|a, b| a.0.cmp(b.0));
    }
    Ok(Vocabulary {
        terms: kept.iter().map(|(t, _)| t.to_string()).collect(),
        doc_freq: kept.iter().map(|&(_, n)| n).collect(),
        corpus_size: token_lists.len(),
    })
}

/// L2-normalized TF-IDF weights keyed by vocabulary index. Term frequency is
/// count over total token count (out-of-vocabulary tokens included).
pub fn tfidf<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> BTreeMap<usize, f64> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for t in tokens {
        if let Some(i) = vocab.index_of(t.as_ref()) {
            *counts.entry(i).or_default() += 1;
        }
    }
    let len = tokens.len() as f64;
    let mut weights: BTreeMap<usize, f64> = counts
        .into_iter()
        .map(|(i, c)| (i, c as f64 / len * vocab.idf(i)))
        .collect();
    let norm = weights.values().map(|w| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for w in weights.values_mut() {
            *w /= norm;
        }
    }
    weights
}

pub const HANDCRAFTED_NAMES: [&str; 8] = [
    "table_count",
    "img_count",
    "internal_anchor_count",
    "max_depth",
    "p_text_fraction",
    "mean_p_length",
    "toc_marker",
    "element_count",
];

pub type Handcrafted = [f64; 8];

/// The eight layout statistics, in [`HANDCRAFTED_NAMES`] order.
pub fn handcrafted_features(tree: &DomTree) -> Handcrafted {
    let mut tables = 0usize;
    let mut imgs = 0usize;
    let mut anchors = 0usize;
    let mut max_depth = 0usize;
    let mut p_chars = 0usize;
    let mut p_count = 0usize;
    let mut toc = false;
    let mut elements = 0usize;
    for (node, el) in tree.elements() {
        elements += 1;
        max_depth = max_depth.max(tree.depth(node.id));
        match el.tag.as_str() {
            "table" => tables += 1,
            "img" => imgs += 1,
            "a" if el.attr("href").is_some_and(|h| h.starts_with('#')) => anchors += 1,
            "p" => {
                p_count += 1;
                p_chars += tree.text_content(node.id).chars().count();
            }
            "h1" | "h2" | "h3" if !toc => {
                toc = tree.text_content(node.id).to_lowercase() == "contents";
            }
            _ => {}
        }
        if !toc && el.has_class("toc") {
            toc = true;
        }
    }
    let total_chars = tree.text_content(0).chars().count();
    let fraction = if total_chars == 0 {
        0.0
    } else {
        p_chars as f64 / total_chars as f64
    };
    let mean_p = if p_count == 0 {
        0.0
    } else {
        p_chars as f64 / p_count as f64
    };
    [
        tables as f64,
        imgs as f64,
        anchors as f64,
        max_depth as f64,
        fraction,
        mean_p,
        if toc { 1.0 } else { 0.0 },
        elements as f64,
    ]
}

/// Per-feature population mean and standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub mean: Handcrafted,
    pub stddev: Handcrafted,
}

impl CorpusStats {
    pub fn compute(rows: &[Handcrafted]) -> Self {
        let n = rows.len().max(1) as f64;
        let mut mean = [0.0; 8];
        let mut stddev = [0.0; 8];
        for j in 0..8 {
            mean[j] = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
            stddev[j] = var.sqrt();
        }
        CorpusStats { mean, stddev }
    }

    fn zscore(&self, j: usize, v: f64) -> f64 {
        if self.stddev[j] == 0.0 {
            0.0
        } else {
            (v - self.mean[j]) / self.stddev[j]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub book_id: String,
    pub tfidf: BTreeMap<usize, f64>,
    pub handcrafted: Handcrafted,
    /// Dense TF-IDF block (vocabulary order) followed by 8 z-scores.
    pub combined: Vec<f64>,
}

pub fn assemble_features(
    book_id: &str,
    tfidf: &BTreeMap<usize, f64>,
    vocab_len: usize,
    handcrafted: &[f64],
    stats: &CorpusStats,
) -> Result<FeatureVector, FeatureError> {
    let handcrafted: Handcrafted = handcrafted
        .try_into()
        .map_err(|_| FeatureError::DimensionMismatch {
            expected: 8,
            actual: handcrafted.len(),
        })?;
    let mut combined = vec![0.0; vocab_len + 8];
    for (&i, &w) in tfidf {
        if i < vocab_len {
            combined[i] = w;
        }
    }
    let norm = combined[..vocab_len].iter().map(|w| w * w).sum::<f64>().sqrt();
    if norm > 0.0 {
        for w in &mut combined[..vocab_len] {
            *w /= norm;
        }
    }
    for (j, &v) in handcrafted.iter().enumerate() {
        combined[vocab_len + j] = stats.zscore(j, v);
    }
    Ok(FeatureVector {
        book_id: book_id.to_string(),
        tfidf: tfidf.clone(),
        handcrafted,
        combined,
    })
}

/// Per-book tokens and layout statistics, before any corpus-level pass.
#[derive(Debug, Clone)]
pub struct BookFeatures {
    pub book_id: String,
    pub tokens: Vec<String>,
    pub handcrafted: Handcrafted,
}

impl BookFeatures {
    pub fn from_tree(book_id: &str, tree: &DomTree) -> Self {
        BookFeatures {
            book_id: book_id.to_string(),
            tokens: dom_path_tokens(tree),
            handcrafted: handcrafted_features(tree),
        }
    }
}

/// Runs the corpus-level pass. Books are processed in `book_id` order
/// regardless of input order, so the result is order-independent.
pub fn featurize_corpus(
    books: &[BookFeatures],
    min_df: usize,
    max_terms: usize,
) -> Result<(Vocabulary, Vec<FeatureVector>), FeatureError> {
    let mut sorted: Vec<&BookFeatures> = books.iter().collect();
    sorted.sort_by(|a, b| a.book_id.cmp(&b.book_id));
    let token_lists: Vec<&Vec<String>> = sorted.iter().map(|b| &b.tokens).collect();
    let token_lists: Vec<Vec<&str>> = token_lists
        .iter()
        .map(|ts| ts.iter().map(String::as_str).collect())
        .collect();
    let vocab = build_vocabulary(&token_lists, min_df, max_terms)?;
    let rows: Vec<Handcrafted> = sorted.iter().map(|b| b.handcrafted).collect();
    let stats = CorpusStats::compute(&rows);
    let vectors = sorted
        .iter()
        .map(|b| {
            let weights = tfidf(&b.tokens, &vocab);
            assemble_features(&b.book_id, &weights, vocab.len(), &b.handcrafted, &stats)
        })
        .collect::<Result<_, _>>()?;
    Ok((vocab, vectors))
}

/// Tab-separated export: `book_id` then the combined values, one book per
/// line, sorted by book id.
pub fn write_feature_matrix(vectors: &[FeatureVector]) -> String {
    let mut sorted: Vec<&FeatureVector> = vectors.iter().collect();
    sorted.sort_by(|a, b| a.book_id.cmp(&b.book_id));
    let mut out = String::new();
    for v in sorted {
        out.push_str(&v.book_id);
        for x in &v.combined {
            let _ = write!(out, "\t{x}");
        }
        out.push('\n');
    }
    out
}

pub fn read_feature_matrix(text: &str) -> Result<Vec<(String, Vec<f64>)>, FeatureError> {
    let mut rows = Vec::new();
    let mut width: Option<usize> = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default().to_string();
        let values = fields
            .map(|f| {
                f.parse::<f64>().map_err(|e| FeatureError::Parse {
                    line: i + 1,
                    message: format!("{f:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(FeatureError::Parse {
                    line: i + 1,
                    message: format!("expected {w} values, found {}", values.len()),
                })
            }
            _ => {}
        }
        rows.push((id, values));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::parse_html;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn token_scheme() {
        let tree = parse_html("<p class='pagenum'>3</p>");
        assert_eq!(dom_path_tokens(&tree), ["t:p", "b:root/p", "c:p.pagenum"]);
        assert!(dom_path_tokens(&parse_html("")).is_empty());
        assert_eq!(
            dom_path_tokens(&parse_html("<div><p/></div>")),
            ["t:div", "b:root/div", "t:p", "b:div/p"]
        );
        assert_eq!(
            dom_path_tokens(&parse_html("<span class='A  b'></span>")),
            ["t:span", "b:root/span", "c:span.a", "c:span.b"]
        );
    }

    #[test]
    fn vocabulary_rules() {
        let v = build_vocabulary(&[toks(&["a", "a", "b"])], 1, 10).unwrap();
        assert_eq!(v.terms, ["a", "b"]);
        assert_eq!(v.doc_freq, [1, 1]);
        assert_eq!(v.corpus_size, 1);

        let corpus = [toks(&["a"]), toks(&["a", "b"]), toks(&["b", "c"])];
        let v = build_vocabulary(&corpus, 2, 10).unwrap();
        assert_eq!(v.terms, ["a", "b"]);
        let v = build_vocabulary(&corpus, 2, 1).unwrap();
        assert_eq!(v.terms, ["a"]);
        assert_eq!(v.doc_freq, [2]);

        let empty: [Vec<String>; 0] = [];
        assert_eq!(build_vocabulary(&empty, 1, 10), Err(FeatureError::EmptyCorpus));
    }

    #[test]
    fn tfidf_examples() {
        let v = Vocabulary {
            terms: toks(&["a"]),
            doc_freq: vec![2],
            corpus_size: 2,
        };
        assert!(tfidf::<String>(&[], &v).is_empty());
        let w = tfidf(&toks(&["a"]), &v);
        assert!((w[&0] - 1.0).abs() < 1e-12);

        let v = Vocabulary {
            terms: toks(&["a", "b"]),
            doc_freq: vec![1, 1],
            corpus_size: 2,
        };
        let w = tfidf(&toks(&["a", "b"]), &v);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((w[&0] - h).abs() < 1e-12 && (w[&1] - h).abs() < 1e-12);
    }

    #[test]
    fn handcrafted_examples() {
        assert_eq!(handcrafted_features(&parse_html("")), [0.0; 8]);
        let f = handcrafted_features(&parse_html("<div><p>abcd</p></div>"));
        assert_eq!(f, [0.0, 0.0, 0.0, 2.0, 1.0, 4.0, 0.0, 2.0]);
        let f = handcrafted_features(&parse_html("<h2>Contents</h2><a href='#c1'>I</a>"));
        assert_eq!(f[2], 1.0);
        assert_eq!(f[6], 1.0);
        let f = handcrafted_features(&parse_html("<div class='toc'><table><tr><td><img></td></tr></table></div>"));
        assert_eq!((f[0], f[1], f[6]), (1.0, 1.0, 1.0));
    }

    #[test]
    fn zscores() {
        let stats = CorpusStats::compute(&[[2.0; 8], [4.0; 8]]);
        let a = assemble_features("a", &BTreeMap::new(), 0, &[2.0; 8], &stats).unwrap();
        let b = assemble_features("b", &BTreeMap::new(), 0, &[4.0; 8], &stats).unwrap();
        assert_eq!(a.combined, vec![-1.0; 8]);
        assert_eq!(b.combined, vec![1.0; 8]);

        let same = CorpusStats::compute(&[[3.0; 8], [3.0; 8]]);
        let c = assemble_features("c", &BTreeMap::new(), 0, &[3.0; 8], &same).unwrap();
        assert_eq!(c.combined, vec![0.0; 8]);

        assert_eq!(
            assemble_features("d", &BTreeMap::new(), 0, &[1.0; 7], &same),
            Err(FeatureError::DimensionMismatch { expected: 8, actual: 7 })
        );
    }

    #[test]
    fn matrix_round_trip() {
        let stats = CorpusStats::compute(&[[1.0; 8]]);
        let mut w = BTreeMap::new();
        w.insert(1, 0.6);
        w.insert(0, 0.8);
        let v = assemble_features("pg1", &w, 2, &[1.0; 8], &stats).unwrap();
        let text = write_feature_matrix(&[v.clone()]);
        let rows = read_feature_matrix(&text).unwrap();
        assert_eq!(rows, vec![("pg1".to_string(), v.combined)]);
        assert!(read_feature_matrix("a\t1\nb\t1\t2\n").is_err());
    }
}

//! Structural families: k-means over feature vectors, nearest-centroid
//! assignment, and a PCA scatter plot of the corpus.

mod kmeans;
mod pca;
mod plot;
pub mod rng;

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

pub use kmeans::{kmeans_best_of, kmeans_fit, ClusterModel, KMeansFit};
pub use pca::{principal_axes, project_2d};
pub use plot::{palette_color, render_scatter_svg, PALETTE};

pub const DEFAULT_K: usize = 12;
pub const DEFAULT_MAX_ITERS: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("k = {k} must be between 1 and the number of points ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("expected dimension {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("projection needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("{points} points but {labels} labels")]
    LengthMismatch { points: usize, labels: usize },
    #[error("model file line {line}: {message}")]
    ModelFormat { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<io::Error> for ClusterError {
    fn from(e: io::Error) -> Self {
        ClusterError::Io(e.to_string())
    }
}

pub fn emit_scatter_plot(points: &[[f64; 2]], labels: &[usize], out_path: &Path) -> Result<(), ClusterError> {
    if points.len() != labels.len() {
        return Err(ClusterError::LengthMismatch {
            points: points.len(),
            labels: labels.len(),
        });
    }
    fs::write(out_path, render_scatter_svg(points, labels))?;
    Ok(())
}

/// `kmeans v1 k=<k> d=<d> seed=<seed>` followed by one space-separated
/// centroid per line. Only centroids are persisted; a loaded model reports
/// zero inertia and iterations.
pub fn write_model(model: &ClusterModel) -> String {
    let mut out = format!("kmeans v1 k={} d={} seed={}\n", model.k, model.dim(), model.seed);
    for c in &model.centroids {
        let line: Vec<String> = c.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

pub fn read_model(text: &str) -> Result<ClusterModel, ClusterError> {
    let bad = |line: usize, message: String| ClusterError::ModelFormat { line, message };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(1, "empty model file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "kmeans" || fields[1] != "v1" {
        return Err(bad(1, format!("unrecognised header {header:?}")));
    }
    let field = |i: usize, key: &str| -> Result<u64, ClusterError> {
        fields[i]
            .strip_prefix(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(1, format!("expected {key}<integer>, got {:?}", fields[i])))
    };
    let k = field(2, "k=")? as usize;
    let d = field(3, "d=")? as usize;
    let seed = field(4, "seed=")?;
    let mut centroids = Vec::with_capacity(k);
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|x| x.parse::<f64>().map_err(|e| bad(i + 2, format!("{x:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if row.len() != d {
            return Err(bad(i + 2, format!("expected {d} values, found {}", row.len())));
        }
        centroids.push(row);
    }
    if centroids.len() != k {
        return Err(bad(1, format!("header says k={k} but {} centroids follow", centroids.len())));
    }
    Ok(ClusterModel {
        k,
        centroids,
        seed,
        inertia: 0.0,
        iterations_run: 0,
        inertia_history: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_file_round_trip() {
        let fit = kmeans_fit(&[vec![0.1, 2.0], vec![3.25, -1.0], vec![1e-17, 4.0]], 2, 3, 50, 1e-12).unwrap();
        let text = write_model(&fit.model);
        assert!(text.starts_with("kmeans v1 k=2 d=2 seed=3\n"));
        let back = read_model(&text).unwrap();
        assert_eq!(back.centroids, fit.model.centroids);
        assert_eq!((back.k, back.seed), (2, 3));
    }

    #[test]
    fn model_file_errors_carry_lines() {
        assert!(matches!(read_model("kmeans v2 k=1 d=1 seed=0\n1\n"), Err(ClusterError::ModelFormat { line: 1, .. })));
        assert!(matches!(read_model("kmeans v1 k=1 d=2 seed=0\n1\n"), Err(ClusterError::ModelFormat { line: 2, .. })));
        assert!(matches!(read_model("kmeans v1 k=2 d=1 seed=0\n1\n"), Err(ClusterError::ModelFormat { line: 1, .. })));
    }

    #[test]
    fn projection_of_axis_aligned_2d_data() {
        // Variance 8 along x, 2 along y; principal axes are the coordinate axes.
        let v = vec![vec![-4.0, 0.0], vec![4.0, 0.0], vec![0.0, -2.0], vec![0.0, 2.0]];
        let p = project_2d(&v).unwrap();
        for (orig, got) in v.iter().zip(&p) {
            assert!((orig[0] - got[0]).abs() < 1e-9, "{orig:?} vs {got:?}");
            assert!((orig[1] - got[1]).abs() < 1e-9, "{orig:?} vs {got:?}");
        }
    }

    #[test]
    fn projection_degenerate_cases() {
        let same = vec![vec![1.0, 2.0, 3.0]; 4];
        assert!(project_2d(&same).unwrap().iter().all(|p| *p == [0.0, 0.0]));
        let line: Vec<Vec<f64>> = (0..3)
            .map(|t| (0..5).map(|j| t as f64 * (j as f64 + 1.0) + 0.5).collect())
            .collect();
        for p in project_2d(&line).unwrap() {
            assert!(p[1].abs() < 1e-6);
            assert!(p.iter().all(|x| x.is_finite()));
        }
        assert_eq!(project_2d(&[vec![1.0]]), Err(ClusterError::TooFewPoints(1)));
    }

    #[test]
    fn svg_counts_and_determinism() {
        let empty = render_scatter_svg(&[], &[]);
        assert!(empty.contains("id=\"axes\""));
        assert_eq!(empty.matches("<circle").count(), 0);
        assert_eq!(empty.matches("legend-entry").count(), 0);

        let pts = [[0.0, 0.0], [1.0, 1.0], [5.0, 5.0], [6.0, 5.0]];
        let labels = [0, 0, 1, 1];
        let svg = render_scatter_svg(&pts, &labels);
        assert_eq!(svg.matches("<circle").count(), 4);
        assert_eq!(svg.matches("class=\"legend-entry\"").count(), 2);
        assert_eq!(svg, render_scatter_svg(&pts, &labels));
        roxmltree::Document::parse(&svg).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.svg"), dir.path().join("b.svg"));
        emit_scatter_plot(&pts, &labels, &a).unwrap();
        emit_scatter_plot(&pts, &labels, &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
        assert!(emit_scatter_plot(&pts, &[0], &a).is_err());
    }
}

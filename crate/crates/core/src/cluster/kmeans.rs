use super::rng::XorShift64Star;
use super::ClusterError;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub seed: u64,
    /// Sum of squared distances of the training points to their centroids.
    pub inertia: f64,
    pub iterations_run: usize,
    /// Inertia after the assignment step of each Lloyd round.
    pub inertia_history: Vec<f64>,
}

impl ClusterModel {
    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    /// Nearest centroid and its Euclidean distance; ties go to the lowest id.
    pub fn assign(&self, vector: &[f64]) -> Result<(usize, f64), ClusterError> {
        if vector.len() != self.dim() {
            return Err(ClusterError::DimensionMismatch {
                expected: self.dim(),
                actual: vector.len(),
            });
        }
        let (id, d2) = nearest(&self.centroids, vector);
        Ok((id, d2.sqrt()))
    }
}

/// A fit plus the final label of every training point.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub model: ClusterModel,
    pub labels: Vec<usize>,
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>], v: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = squared_distance(c, v);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn validate(vectors: &[Vec<f64>], k: usize) -> Result<usize, ClusterError> {
    if k == 0 || k > vectors.len() {
        return Err(ClusterError::KTooLarge { k, n: vectors.len() });
    }
    let d = vectors[0].len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != d) {
        return Err(ClusterError::DimensionMismatch {
            expected: d,
            actual: bad.len(),
        });
    }
    Ok(d)
}

/// k-means++ seeding: first centre uniform, then D²-weighted.
fn plus_plus_init(vectors: &[Vec<f64>], k: usize, rng: &mut XorShift64Star) -> Vec<Vec<f64>> {
    let n = vectors.len();
    let mut centroids = vec![vectors[rng.next_index(n)].clone()];
    let mut d2: Vec<f64> = vectors
        .iter()
        .map(|v| squared_distance(v, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.next_f64() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                chosen = Some(i);
                if acc > target {
                    break;
                }
            }
            chosen.expect("positive total implies a positive weight")
        } else {
            rng.next_index(n)
        };
        let c = vectors[pick].clone();
        for (w, v) in d2.iter_mut().zip(vectors) {
            *w = w.min(squared_distance(v, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Assigns every point, then re-seeds empty clusters with the point
/// farthest from its centroid (taken from a cluster that keeps ≥ 1 point).
fn assign_and_repair(vectors: &[Vec<f64>], centroids: &mut [Vec<f64>]) -> (Vec<usize>, f64) {
    let k = centroids.len();
    let mut labels = Vec::with_capacity(vectors.len());
    let mut dists = Vec::with_capacity(vectors.len());
    for v in vectors {
        let (l, d) = nearest(centroids, v);
        labels.push(l);
        dists.push(d);
    }
    let mut sizes = vec![0usize; k];
    for &l in &labels {
        sizes[l] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut far: Option<usize> = None;
        for i in 0..vectors.len() {
            if sizes[labels[i]] < 2 {
                continue;
            }
            if far.is_none_or(|f| dists[i] > dists[f]) {
                far = Some(i);
            }
        }
        let Some(p) = far else { break };
        sizes[labels[p]] -= 1;
        labels[p] = empty;
        sizes[empty] = 1;
        dists[p] = 0.0;
        centroids[empty] = vectors[p].clone();
    }
    (labels, dists.iter().sum())
}

fn means(vectors: &[Vec<f64>], labels: &[usize], previous: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = previous.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; d]; previous.len()];
    let mut counts = vec![0usize; previous.len()];
    for (v, &l) in vectors.iter().zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(v) {
            *s += x;
        }
    }
    sums.into_iter()
        .zip(counts)
        .zip(previous)
        .map(|((s, c), prev)| {
            if c == 0 {
                prev.clone()
            } else {
                s.into_iter().map(|x| x / c as f64).collect()
            }
        })
        .collect()
}

/// Lloyd's algorithm from a k-means++ start. Stops once every centroid
/// moves less than `tol`, or after `max_iters` rounds.
pub fn kmeans_fit(
    vectors: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<KMeansFit, ClusterError> {
    validate(vectors, k)?;
    let mut rng = XorShift64Star::new(seed);
    let mut centroids = plus_plus_init(vectors, k, &mut rng);
    let mut history = Vec::new();
    let mut iterations_run = 0;
    while iterations_run < max_iters {
        let (labels, inertia) = assign_and_repair(vectors, &mut centroids);
        history.push(inertia);
        let updated = means(vectors, &labels, &centroids);
        let shift = updated
            .iter()
            .zip(&centroids)
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        iterations_run += 1;
        if shift < tol {
            break;
        }
    }
    let (labels, inertia) = assign_and_repair(vectors, &mut centroids);
    Ok(KMeansFit {
        model: ClusterModel {
            k,
            centroids,
            seed,
            inertia,
            iterations_run,
            inertia_history: history,
        },
        labels,
    })
}

/// Restart harness: fits with seeds `base_seed .. base_seed + restarts` and
/// keeps the lowest inertia (earliest seed on ties).
pub fn kmeans_best_of(
    vectors: &[Vec<f64>],
    k: usize,
    base_seed: u64,
    restarts: usize,
    max_iters: usize,
    tol: f64,
) -> Result<KMeansFit, ClusterError> {
    let mut best: Option<KMeansFit> = None;
    for r in 0..restarts.max(1) as u64 {
        let fit = kmeans_fit(vectors, k, base_seed.wrapping_add(r), max_iters, tol)?;
        if best.as_ref().is_none_or(|b| fit.model.inertia < b.model.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(xs: &[f64]) -> Vec<Vec<f64>> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn one_cluster_per_point_has_zero_inertia() {
        let v = vec![vec![0.0, 1.0], vec![3.0, -2.0], vec![5.0, 5.0]];
        let fit = kmeans_fit(&v, 3, 7, 100, 1e-12).unwrap();
        assert_eq!(fit.model.inertia, 0.0);
    }

    #[test]
    fn two_well_separated_pairs() {
        let fit = kmeans_fit(&pts(&[0.0, 1.0, 10.0, 11.0]), 2, 1, 100, 1e-12).unwrap();
        let mut cs: Vec<f64> = fit.model.centroids.iter().map(|c| c[0]).collect();
        cs.sort_by(f64::total_cmp);
        assert_eq!(cs, [0.5, 10.5]);
        assert!((fit.model.inertia - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k1_is_the_mean() {
        let v = vec![vec![1.0, 2.0], vec![3.0, 6.0], vec![5.0, 1.0]];
        let fit = kmeans_fit(&v, 1, 0, 100, 1e-12).unwrap();
        assert_eq!(fit.model.centroids[0], vec![3.0, 3.0]);
    }

    #[test]
    fn errors() {
        assert_eq!(
            kmeans_fit(&pts(&[1.0]), 2, 0, 10, 1e-6),
            Err(ClusterError::KTooLarge { k: 2, n: 1 })
        );
        assert!(matches!(
            kmeans_fit(&[vec![1.0], vec![1.0, 2.0]], 1, 0, 10, 1e-6),
            Err(ClusterError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn assign_rules() {
        let model = ClusterModel {
            k: 2,
            centroids: vec![vec![0.0], vec![10.0]],
            seed: 0,
            inertia: 0.0,
            iterations_run: 0,
            inertia_history: vec![],
        };
        assert_eq!(model.assign(&[4.0]).unwrap(), (0, 4.0));
        assert_eq!(model.assign(&[5.0]).unwrap(), (0, 5.0));
        assert_eq!(model.assign(&[10.0]).unwrap(), (1, 0.0));
        assert!(model.assign(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn duplicate_points_repair_empty_clusters() {
        let v = pts(&[2.0, 2.0, 2.0, 2.0]);
        let fit = kmeans_fit(&v, 3, 5, 20, 1e-12).unwrap();
        let mut seen = fit.labels.clone();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 3);
        assert_eq!(fit.model.inertia, 0.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let v: Vec<Vec<f64>> = (0..30).map(|i| vec![(i * 7 % 11) as f64, (i * 3 % 5) as f64]).collect();
        let a = kmeans_fit(&v, 4, 99, 100, 1e-9).unwrap();
        let b = kmeans_fit(&v, 4, 99, 100, 1e-9).unwrap();
        assert_eq!(a, b);
    }
}

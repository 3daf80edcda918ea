use super::ClusterError;

const POWER_ITERATIONS: usize = 100;
const TINY: f64 = 1e-300;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> bool {
    let n = dot(v, v).sqrt();
    if n <= TINY {
        v.iter_mut().for_each(|x| *x = 0.0);
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let p = dot(v, b);
        for (x, y) in v.iter_mut().zip(b) {
            *x -= p * y;
        }
    }
}

/// Xᵀ(X v) without forming the covariance matrix.
fn gram_apply(rows: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for r in rows {
        let s = dot(r, v);
        for (o, x) in out.iter_mut().zip(r) {
            *o += s * x;
        }
    }
    out
}

/// Starting vector: all ones, made orthogonal to the components found so
/// far. Falls back to unit basis vectors if that projection vanishes.
fn start_vector(d: usize, found: &[Vec<f64>]) -> Vec<f64> {
    let mut v = vec![1.0; d];
    orthogonalize(&mut v, found);
    if normalize(&mut v) {
        return v;
    }
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        orthogonalize(&mut e, found);
        if normalize(&mut e) {
            return e;
        }
    }
    vec![0.0; d]
}

/// Flips `v` so its largest-magnitude loading (first on ties) is positive.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Top-2 principal axes by power iteration with deflation. Returns the
/// component vectors alongside the projected points.
pub fn principal_axes(vectors: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<[f64; 2]>), ClusterError> {
    if vectors.len() < 2 {
        return Err(ClusterError::TooFewPoints(vectors.len()));
    }
    let d = vectors[0].len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != d) {
        return Err(ClusterError::DimensionMismatch {
            expected: d,
            actual: bad.len(),
        });
    }
    let n = vectors.len() as f64;
    let mean: Vec<f64> = (0..d)
        .map(|j| vectors.iter().map(|v| v[j]).sum::<f64>() / n)
        .collect();
    let centered: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();

    let mut components: Vec<Vec<f64>> = Vec::with_capacity(2);
    for _ in 0..2 {
        let mut v = start_vector(d, &components);
        for _ in 0..POWER_ITERATIONS {
            let mut w = gram_apply(&centered, &v);
            orthogonalize(&mut w, &components);
            if !normalize(&mut w) {
                v = w;
                break;
            }
            v = w;
        }
        fix_sign(&mut v);
        components.push(v);
    }
    let points = centered
        .iter()
        .map(|r| [dot(r, &components[0]), dot(r, &components[1])])
        .collect();
    Ok((components, points))
}

/// 2-D coordinates of each vector in its top-2 principal component basis.
pub fn project_2d(vectors: &[Vec<f64>]) -> Result<Vec<[f64; 2]>, ClusterError> {
    principal_axes(vectors).map(|(_, points)| points)
}

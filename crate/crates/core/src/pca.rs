//! Eigen-image classifier.
//!
//! Training centres the flattened images, eigen-decomposes their sample
//! covariance and keeps the top `k` eigenvectors as the PC-space basis.
//! When the feature length `N` exceeds the sample count `n` the `N x N`
//! covariance is never formed: the `n x n` Gram matrix `A^T A / (n - 1)`
//! shares its nonzero spectrum, and each of its eigenvectors `u` maps to
//! the covariance eigenvector `A u / ||A u||` (snapshot method).
//!
//! Classification is nearest neighbour in PC space, aggregated per label.

use thiserror::Error;

use crate::linalg::{dot, eigen_sym, norm, LinalgError, Matrix};
use crate::ranking::{Match, RankedMatches};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PcaError {
    #[error("need at least 2 training samples, got {0}")]
    TooFewSamples(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("component count {k} exceeds min(n, N) = {max}")]
    TooManyComponents { k: usize, max: usize },
    #[error("training data has no variance")]
    RankDeficient,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, PcaError>;

/// Eigenvalues at or below this are treated as zero variance.
pub const RANK_TOL: f64 = 1e-12;
const PERCENT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    vectors: Vec<Vec<f64>>,
    labels: Vec<String>,
    dims: (usize, usize),
}

impl TrainingSet {
    /// Image dims default to `(N, 1)`; see [`TrainingSet::with_dims`].
    pub fn new(vectors: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(PcaError::TooFewSamples(vectors.len()));
        }
        if labels.len() != vectors.len() {
            return Err(PcaError::DimensionMismatch(format!(
                "{} labels for {} vectors",
                labels.len(),
                vectors.len()
            )));
        }
        let len = vectors[0].len();
        if len == 0 || vectors.iter().any(|v| v.len() != len) {
            return Err(PcaError::DimensionMismatch(
                "feature vectors must share a nonzero length".into(),
            ));
        }
        Ok(Self { vectors, labels, dims: (len, 1) })
    }

    pub fn with_dims(mut self, width: usize, height: usize) -> Result<Self> {
        if width * height != self.feature_len() {
            return Err(PcaError::DimensionMismatch(format!(
                "{width}x{height} does not match feature length {}",
                self.feature_len()
            )));
        }
        self.dims = (width, height);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn feature_len(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// How the covariance spectrum is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceRoute {
    /// Gram matrix when `N > n`, direct covariance otherwise.
    #[default]
    Auto,
    Direct,
    Snapshot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k` rows, each a unit eigenvector of length `N`, by descending eigenvalue.
    pub basis: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub projections: Vec<Vec<f64>>,
    pub labels: Vec<String>,
    pub dims: (usize, usize),
}

pub fn default_components(n: usize) -> usize {
    n.min(20)
}

pub fn train_pca(ts: &TrainingSet, k: usize) -> Result<PcaModel> {
    train_pca_with(ts, k, CovarianceRoute::Auto)
}

pub fn train_pca_with(ts: &TrainingSet, k: usize, route: CovarianceRoute) -> Result<PcaModel> {
    let n = ts.len();
    let dim = ts.feature_len();
    if k > n.min(dim) {
        return Err(PcaError::TooManyComponents { k, max: n.min(dim) });
    }

    let mut mean = vec![0.0; dim];
    for v in &ts.vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered: Vec<Vec<f64>> = ts
        .vectors
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();

    let snapshot = match route {
        CovarianceRoute::Auto => dim > n,
        CovarianceRoute::Direct => false,
        CovarianceRoute::Snapshot => true,
    };
    let (values, vectors) = if snapshot {
        snapshot_spectrum(&centered, k)?
    } else {
        direct_spectrum(&centered, k)?
    };
    let no_variance = match values.first() {
        Some(&top) => top <= RANK_TOL,
        None => total_variance(&centered) <= RANK_TOL,
    };
    if no_variance {
        return Err(PcaError::RankDeficient);
    }

    let projections = centered
        .iter()
        .map(|c| vectors.iter().map(|b| dot(b, c)).collect())
        .collect();
    Ok(PcaModel {
        mean,
        basis: vectors,
        eigenvalues: values,
        projections,
        labels: ts.labels.clone(),
        dims: ts.dims,
    })
}

fn total_variance(centered: &[Vec<f64>]) -> f64 {
    centered.iter().map(|c| dot(c, c)).sum::<f64>() / (centered.len() - 1) as f64
}

/// Eigenpairs of the `N x N` sample covariance.
fn direct_spectrum(centered: &[Vec<f64>], k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = centered.len();
    let dim = centered[0].len();
    let mut cov = Matrix::zeros(dim, dim);
    for c in centered {
        for i in 0..dim {
            if c[i] == 0.0 {
                continue;
            }
            for j in i..dim {
                cov[(i, j)] += c[i] * c[j];
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..dim {
        for j in i..dim {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let eig = eigen_sym(&cov)?;
    let values = eig.values[..k].iter().map(|&v| v.max(0.0)).collect();
    let vectors = (0..k).map(|i| eig.vector(i)).collect();
    Ok((values, vectors))
}

/// Eigenpairs of the covariance via the `n x n` Gram matrix.
fn snapshot_spectrum(centered: &[Vec<f64>], k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = centered.len();
    let dim = centered[0].len();
    let denom = (n - 1) as f64;
    let mut gram = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let g = dot(&centered[i], &centered[j]) / denom;
            gram[(i, j)] = g;
            gram[(j, i)] = g;
        }
    }
    let eig = eigen_sym(&gram)?;
    let top = eig.values[0].max(0.0);

    let mut values = Vec::with_capacity(k);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
    for i in 0..k {
        let lambda = eig.values[i];
        if lambda <= RANK_TOL.max(top * 1e-10) {
            break;
        }
        let u = eig.vector(i);
        let mut v = vec![0.0; dim];
        for (c, &w) in centered.iter().zip(&u) {
            for (vj, cj) in v.iter_mut().zip(c) {
                *vj += w * cj;
            }
        }
        // A u is orthogonal to earlier vectors in exact arithmetic; re-project
        // so small eigenvalues do not amplify rounding into the basis.
        for b in &vectors {
            let p = dot(b, &v);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let len = norm(&v);
        v.iter_mut().for_each(|x| *x /= len);
        orient(&mut v);
        values.push(lambda);
        vectors.push(v);
    }
    // Directions outside the data span carry zero variance.
    complete_orthonormal(&mut vectors, dim, k);
    values.resize(k, 0.0);
    Ok((values, vectors))
}

fn orient(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Extends `basis` to `k` orthonormal vectors using standard basis candidates.
fn complete_orthonormal(basis: &mut Vec<Vec<f64>>, dim: usize, k: usize) {
    let mut candidate = 0;
    while basis.len() < k && candidate < dim {
        let mut v = vec![0.0; dim];
        v[candidate] = 1.0;
        candidate += 1;
        for _ in 0..2 {
            for b in basis.iter() {
                let p = dot(b, &v);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let len = norm(&v);
        if len > 1e-6 {
            v.iter_mut().for_each(|x| *x /= len);
            basis.push(v);
        }
    }
}

impl PcaModel {
    pub fn components(&self) -> usize {
        self.basis.len()
    }

    pub fn feature_len(&self) -> usize {
        self.mean.len()
    }

    /// Distinct labels in order of first appearance.
    pub fn label_set(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for l in &self.labels {
            if !out.contains(l) {
                out.push(l.clone());
            }
        }
        out
    }

    /// `basis^T (v - mean)`.
    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.feature_len() {
            return Err(PcaError::DimensionMismatch(format!(
                "vector of length {} for a model over {}",
                v.len(),
                self.feature_len()
            )));
        }
        let centered: Vec<f64> = v.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        Ok(self.basis.iter().map(|b| dot(b, &centered)).collect())
    }

    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (b, &c) in self.basis.iter().zip(coords) {
            out.iter_mut().zip(b).for_each(|(o, x)| *o += c * x);
        }
        out
    }

    /// Nearest exemplar distance per label, in PC space.
    pub fn label_distances(&self, v: &[f64]) -> Result<Vec<(String, f64)>> {
        let p = self.project(v)?;
        let mut out: Vec<(String, f64)> = Vec::new();
        for (proj, label) in self.projections.iter().zip(&self.labels) {
            let d = proj.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            match out.iter_mut().find(|(l, _)| l == label) {
                Some(entry) => entry.1 = entry.1.min(d),
                None => out.push((label.clone(), d)),
            }
        }
        Ok(out)
    }

    /// Inverse-distance percentages over labels, best first.
    pub fn classify(&self, v: &[f64]) -> Result<RankedMatches> {
        let dists = self.label_distances(v)?;
        Ok(rank_by_distance(dists))
    }
}

/// `pct_L = 100 * (1 / (d_L + eps)) / sum_j 1 / (d_j + eps)`.
pub fn rank_by_distance(dists: Vec<(String, f64)>) -> RankedMatches {
    let inv: Vec<f64> = dists.iter().map(|(_, d)| 1.0 / (d + PERCENT_EPS)).collect();
    let total: f64 = inv.iter().sum();
    let mut entries: Vec<Match> = dists
        .into_iter()
        .zip(inv)
        .map(|((label, distance), w)| Match { label, percentage: 100.0 * w / total, distance })
        .collect();
    entries.sort_by(|a, b| a.distance.total_cmp(&b.distance));
    RankedMatches::new(entries)
}

pub fn classify_pca(model: &PcaModel, v: &[f64]) -> Result<RankedMatches> {
    model.classify(v)
}

//! Principal directions of a latent space and edits along them.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::features::FeatureSet;
use crate::linalg::{symmetric_eigen, LinalgError, Matrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LatentError {
    #[error("k = {k} must satisfy 1 <= k <= {limit}")]
    KTooLarge { k: usize, limit: usize },
    #[error("latent bank has zero variance")]
    DegenerateData,
    #[error("component {component} out of range for {k} components")]
    BadComponent { component: usize, k: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `n x w` matrix of latent codes sampled from one space (e.g. `"W"`).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBank {
    vectors: Matrix,
    space_id: String,
}

impl LatentBank {
    pub fn new(vectors: Matrix, space_id: impl Into<String>) -> Result<Self, LatentError> {
        if vectors.rows() == 0 || vectors.cols() == 0 {
            return Err(LatentError::InvariantViolation("latent bank is empty".to_string()));
        }
        if !vectors.is_finite() {
            return Err(LatentError::InvariantViolation("latent bank has non-finite entries".to_string()));
        }
        if vectors.rows() < vectors.cols() {
            log::warn!("latent bank has fewer samples ({}) than dimensions ({})", vectors.rows(), vectors.cols());
        }
        Ok(LatentBank { vectors, space_id: space_id.into() })
    }

    /// Reads rows of a feature set as latent codes; the extractor id becomes
    /// the space id.
    pub fn from_features(fs: &FeatureSet) -> Result<Self, LatentError> {
        let data = fs.as_flat().iter().map(|&v| f64::from(v)).collect();
        LatentBank::new(Matrix::from_row_major(fs.count(), fs.dim(), data), fs.extractor_id())
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn space_id(&self) -> &str {
        &self.space_id
    }

    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.rows() == 0
    }

    pub fn width(&self) -> usize {
        self.vectors.cols()
    }
}

/// Leading principal directions: orthonormal rows sorted by decreasing
/// eigenvalue, plus the bank mean they are centred on.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaDirections {
    components: Matrix,
    eigenvalues: Vec<f64>,
    mean: Vec<f64>,
}

impl PcaDirections {
    /// Checks orthonormality (1e-8), ordering and non-negativity.
    pub fn from_parts(components: Matrix, eigenvalues: Vec<f64>, mean: Vec<f64>) -> Result<Self, LatentError> {
        if components.rows() != eigenvalues.len() {
            return Err(LatentError::DimMismatch(components.rows(), eigenvalues.len()));
        }
        if components.cols() != mean.len() {
            return Err(LatentError::DimMismatch(components.cols(), mean.len()));
        }
        if eigenvalues.iter().any(|&v| !(v >= 0.0 && v.is_finite())) || eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(LatentError::InvariantViolation("eigenvalues must be non-negative and non-increasing".to_string()));
        }
        let gram = components.matmul(&components.transpose());
        if gram.sub(&Matrix::identity(components.rows())).max_abs() > 1e-8 {
            return Err(LatentError::InvariantViolation("components are not orthonormal".to_string()));
        }
        Ok(PcaDirections { components, eigenvalues, mean })
    }

    pub fn k(&self) -> usize {
        self.components.rows()
    }

    pub fn width(&self) -> usize {
        self.components.cols()
    }

    pub fn components(&self) -> &Matrix {
        &self.components
    }

    pub fn component(&self, i: usize) -> &[f64] {
        self.components.row(i)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Coordinate of `x` along component `i`, `<x - mean, v_i>`.
    pub fn coordinate(&self, x: &[f64], i: usize) -> f64 {
        self.component(i).iter().zip(x.iter().zip(&self.mean)).map(|(v, (xi, m))| v * (xi - m)).sum()
    }

    /// All `k` coordinates of `x`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        (0..self.k()).map(|i| self.coordinate(x, i)).collect()
    }

    /// `mean + sum_i coords[i] v_i`.
    pub fn reconstruct(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (i, &c) in coords.iter().enumerate().take(self.k()) {
            for (o, v) in out.iter_mut().zip(self.component(i)) {
                *o += c * v;
            }
        }
        out
    }
}

/// PCA of the mean-centred bank (covariance divisor n - 1, no whitening).
///
/// Each component is signed so that its largest-magnitude coordinate is
/// positive. Eigenvalues below `w * eps * lambda_max` are reported as 0.
pub fn pca(bank: &LatentBank, k: usize) -> Result<PcaDirections, LatentError> {
    let (n, w) = (bank.len(), bank.width());
    let limit = n.saturating_sub(1).min(w);
    if k == 0 || k > limit {
        return Err(LatentError::KTooLarge { k, limit });
    }
    let mut mean = alloc::vec![0.0; w];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(bank.vectors.row(i)) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut cov = Matrix::zeros(w, w);
    let mut centered = alloc::vec![0.0; w];
    for i in 0..n {
        for ((c, v), m) in centered.iter_mut().zip(bank.vectors.row(i)).zip(&mean) {
            *c = v - m;
        }
        for a in 0..w {
            let ca = centered[a];
            for (o, cb) in cov.row_mut(a)[a..].iter_mut().zip(&centered[a..]) {
                *o += ca * cb;
            }
        }
    }
    for a in 0..w {
        for b in a..w {
            let v = cov[(a, b)] / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    if cov.trace() <= 0.0 {
        return Err(LatentError::DegenerateData);
    }

    let eig = symmetric_eigen(&cov)?;
    let vectors = eig.vectors.as_ref().expect("vectors requested");
    let lambda_max = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    let floor = w as f64 * f64::EPSILON * lambda_max;

    let mut components = Matrix::zeros(k, w);
    let mut eigenvalues = Vec::with_capacity(k);
    for (out_row, src) in (0..w).rev().take(k).enumerate() {
        let lambda = eig.values[src];
        eigenvalues.push(if lambda <= floor { 0.0 } else { lambda });
        let row = components.row_mut(out_row);
        for (r, dst) in row.iter_mut().enumerate() {
            *dst = vectors[(r, src)];
        }
        apply_sign_rule(row);
    }
    Ok(PcaDirections { components, eigenvalues, mean })
}

/// Flips `v` so its largest-magnitude coordinate (first one on ties) is positive.
pub fn apply_sign_rule(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// For each target coordinate `c`, moves `base` along component `component`
/// until its coordinate there equals `c`, leaving other coordinates alone.
pub fn edit_sequence(dirs: &PcaDirections, base: &[f64], component: usize, coords: &[f64]) -> Result<Vec<Vec<f64>>, LatentError> {
    if component >= dirs.k() {
        return Err(LatentError::BadComponent { component, k: dirs.k() });
    }
    if base.len() != dirs.width() {
        return Err(LatentError::DimMismatch(base.len(), dirs.width()));
    }
    let v = dirs.component(component);
    let current = dirs.coordinate(base, component);
    Ok(coords
        .iter()
        .map(|&c| {
            let step = c - current;
            if step == 0.0 {
                return base.to_vec();
            }
            base.iter().zip(v).map(|(b, vi)| b + step * vi).collect()
        })
        .collect())
}

/// Edit grid: rows are samples, columns are target coordinates. With
/// `relative`, the targets are offsets from each sample's own coordinate.
pub fn edit_grid(
    dirs: &PcaDirections,
    samples: &[Vec<f64>],
    component: usize,
    coords: &[f64],
    relative: bool,
) -> Result<Vec<Vec<Vec<f64>>>, LatentError> {
    samples
        .iter()
        .map(|s| {
            if relative {
                if component >= dirs.k() {
                    return Err(LatentError::BadComponent { component, k: dirs.k() });
                }
                if s.len() != dirs.width() {
                    return Err(LatentError::DimMismatch(s.len(), dirs.width()));
                }
                let own = dirs.coordinate(s, component);
                let targets: Vec<f64> = coords.iter().map(|c| own + c).collect();
                let mut out = edit_sequence(dirs, s, component, &targets)?;
                // A zero offset is an exact identity.
                for (o, c) in out.iter_mut().zip(coords) {
                    if *c == 0.0 {
                        o.clone_from(s);
                    }
                }
                Ok(out)
            } else {
                edit_sequence(dirs, s, component, coords)
            }
        })
        .collect()
}

impl core::fmt::Display for PcaDirections {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let vals: Vec<String> = self.eigenvalues.iter().map(|v| format!("{v:.6e}")).collect();
        write!(f, "PCA(k={}, w={}, eigenvalues=[{}])", self.k(), self.width(), vals.join(", "))
    }
}

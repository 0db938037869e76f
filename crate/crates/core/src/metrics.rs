//! The metric engine.
//!
//! Fréchet distances between Gaussian fits of feature sets (FID and every
//! variant computed from a different extractor), the unbiased KID estimator,
//! k-NN precision/recall, patch-FID and pixel-intensity histograms. All
//! accumulation is in double precision.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::features::{FeatureError, FeatureSet};
use crate::imageprep::{sample_corpus_patches, GrayU8, NormalizedImage, Patch, PrepError};
use crate::latent::{pca, LatentBank, LatentError, PcaDirections};
use crate::linalg::{symmetric_eigen, symmetric_eigenvalues, LinalgError, Matrix};
use crate::rng::{derive_seed, seeded};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive semi-definite (eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("subset size {subset_size} exceeds available samples {available}")]
    SubsetTooLarge { subset_size: usize, available: usize },
    #[error("k = {k} must satisfy 1 <= k < {limit}")]
    KTooLarge { k: usize, limit: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("cutoff {0} outside 0..=255")]
    BadCutoff(u32),
    #[error("numerics error: {0}")]
    Numerics(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Prep(#[from] PrepError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Latent(#[from] LatentError),
}

// ---------------------------------------------------------------------------
// Gaussian statistics and the Fréchet distance

/// Mean, covariance and sample count of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    mean: Vec<f64>,
    cov: Matrix,
    n: usize,
}

impl GaussianStats {
    /// Validates `cov` is `d x d`, finite and symmetric within 1e-9 relative.
    pub fn new(mean: Vec<f64>, cov: Matrix, n: usize) -> Result<Self, MetricsError> {
        if n < 2 {
            return Err(MetricsError::TooFewSamples { needed: 2, got: n });
        }
        if cov.rows() != mean.len() || cov.cols() != mean.len() {
            return Err(MetricsError::DimMismatch(mean.len(), cov.rows()));
        }
        if !cov.is_finite() || mean.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::Numerics("non-finite statistics".to_string()));
        }
        let asym = cov.asymmetry();
        if asym > 1e-9 * cov.max_abs().max(f64::MIN_POSITIVE) {
            return Err(MetricsError::NotSymmetric(asym));
        }
        Ok(GaussianStats { mean, cov, n })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and unbiased (n - 1) covariance, symmetrized.
pub fn gaussian_stats(fs: &FeatureSet) -> Result<GaussianStats, MetricsError> {
    let n = fs.count();
    if n < 2 {
        return Err(MetricsError::TooFewSamples { needed: 2, got: n });
    }
    let d = fs.dim();
    let mut mean = vec![0.0f64; d];
    for row in fs.rows() {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += f64::from(v);
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }

    let mut cov = Matrix::zeros(d, d);
    let mut centered = vec![0.0f64; d];
    for row in fs.rows() {
        for ((c, &v), m) in centered.iter_mut().zip(row).zip(&mean) {
            *c = f64::from(v) - m;
        }
        for i in 0..d {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            let out = &mut cov.row_mut(i)[i..];
            for (o, &cj) in out.iter_mut().zip(&centered[i..]) {
                *o += ci * cj;
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov.symmetrize();
    GaussianStats::new(mean, cov, n)
}

/// Principal square root of a symmetric positive semi-definite matrix.
///
/// Eigenvalues in `[-tol, 0)` with `tol = 1e-10 * |trace|` are treated as 0.
pub fn sqrtm_psd(m: &Matrix) -> Result<Matrix, MetricsError> {
    if !m.is_square() {
        return Err(MetricsError::DimMismatch(m.rows(), m.cols()));
    }
    let scale = m.max_abs();
    let asym = m.asymmetry();
    if asym > 1e-9 * scale.max(f64::MIN_POSITIVE) {
        return Err(MetricsError::NotSymmetric(asym));
    }
    let eig = symmetric_eigen(m)?;
    let tol = psd_tolerance(m);
    let n = m.rows();
    let vectors = eig.vectors.as_ref().expect("vectors requested");
    let mut roots = Vec::with_capacity(n);
    for &lambda in &eig.values {
        if lambda < -tol {
            return Err(MetricsError::NotPsd(lambda));
        }
        roots.push(libm::sqrt(lambda.max(0.0)));
    }
    // S = V diag(sqrt(lambda)) V^T
    let mut scaled = vectors.clone();
    for k in 0..n {
        for (v, r) in scaled.row_mut(k).iter_mut().zip(&roots) {
            *v *= r;
        }
    }
    let mut s = scaled.matmul(&vectors.transpose());
    s.symmetrize();
    debug_assert!(
        s.matmul(&s).sub(m).frobenius_norm() <= 1e-6 * m.frobenius_norm().max(tol),
        "sqrtm self-check failed"
    );
    Ok(s)
}

fn psd_tolerance(m: &Matrix) -> f64 {
    let trace = m.trace().abs();
    1e-10 * if trace > 0.0 { trace } else { m.max_abs() }
}

/// `|mu_a - mu_b|^2 + tr(S_a) + tr(S_b) - 2 tr((S_a^1/2 S_b S_a^1/2)^1/2)`.
///
/// Small negative results from rounding (down to `-1e-6 * max(1, tr S_a + tr
/// S_b)`) are reported as 0; anything below that is a numerics error.
/// Identical statistics give exactly 0.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<f64, MetricsError> {
    if a.dim() != b.dim() {
        return Err(MetricsError::DimMismatch(a.dim(), b.dim()));
    }
    if a.mean == b.mean && a.cov == b.cov {
        return Ok(0.0);
    }
    let mean_term: f64 = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y) * (x - y)).sum();
    let tr_a = a.cov.trace();
    let tr_b = b.cov.trace();
    let root_a = sqrtm_psd(&a.cov)?;
    let mut middle = root_a.matmul(&b.cov).matmul(&root_a);
    middle.symmetrize();
    let tol = psd_tolerance(&middle);
    let mut tr_root = 0.0;
    for lambda in symmetric_eigenvalues(&middle)? {
        if lambda < -tol {
            return Err(MetricsError::Numerics(format!("cross term has eigenvalue {lambda:e}")));
        }
        tr_root += libm::sqrt(lambda.max(0.0));
    }
    let fd = mean_term + tr_a + tr_b - 2.0 * tr_root;
    clamp_distance(fd, 1.0f64.max(tr_a + tr_b))
}

fn clamp_distance(fd: f64, scale: f64) -> Result<f64, MetricsError> {
    if !fd.is_finite() {
        return Err(MetricsError::Numerics("non-finite distance".to_string()));
    }
    if fd >= 0.0 {
        Ok(fd)
    } else if fd >= -1e-6 * scale {
        Ok(0.0)
    } else {
        Err(MetricsError::Numerics(format!("distance {fd:e} is negative beyond rounding")))
    }
}

/// Fréchet distance between the Gaussian fits of two feature sets.
pub fn fid(real: &FeatureSet, fake: &FeatureSet) -> Result<f64, MetricsError> {
    if real.dim() != fake.dim() {
        return Err(MetricsError::DimMismatch(real.dim(), fake.dim()));
    }
    frechet_distance(&gaussian_stats(real)?, &gaussian_stats(fake)?)
}

// ---------------------------------------------------------------------------
// KID

/// Mean and sample standard deviation of per-subset MMD² estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KidEstimate {
    pub mean: f64,
    /// 0 when a single subset is drawn.
    pub std: f64,
    pub subset_size: usize,
    pub n_subsets: usize,
}

pub const KID_DEFAULT_SUBSET_SIZE: usize = 1000;
pub const KID_DEFAULT_SUBSETS: usize = 100;

/// Cubic polynomial kernel `(u·v / d + 1)^3`.
pub fn polynomial_kernel(u: &[f32], v: &[f32]) -> f64 {
    let d = u.len() as f64;
    let dot: f64 = u.iter().zip(v).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum();
    let t = dot / d + 1.0;
    t * t * t
}

/// Unbiased MMD² between two equally sized row collections.
pub fn mmd2_unbiased(x: &[&[f32]], y: &[&[f32]]) -> f64 {
    let m = x.len() as f64;
    let within = |rows: &[&[f32]]| {
        let mut s = 0.0;
        for i in 0..rows.len() {
            for j in (i + 1)..rows.len() {
                s += polynomial_kernel(rows[i], rows[j]);
            }
        }
        2.0 * s
    };
    let mut cross = 0.0;
    for xi in x {
        for yj in y {
            cross += polynomial_kernel(xi, yj);
        }
    }
    let n = y.len() as f64;
    within(x) / (m * (m - 1.0)) + within(y) / (n * (n - 1.0)) - 2.0 * cross / (m * n)
}

/// Unbiased KID over `n_subsets` seeded subsets of `subset_size` rows drawn
/// without replacement from each side.
pub fn kid(x: &FeatureSet, y: &FeatureSet, subset_size: usize, n_subsets: usize, seed: u64) -> Result<KidEstimate, MetricsError> {
    if x.dim() != y.dim() {
        return Err(MetricsError::DimMismatch(x.dim(), y.dim()));
    }
    let available = x.count().min(y.count());
    if subset_size > available {
        return Err(MetricsError::SubsetTooLarge { subset_size, available });
    }
    if subset_size < 2 {
        return Err(MetricsError::TooFewSamples { needed: 2, got: subset_size });
    }
    if n_subsets == 0 {
        return Err(MetricsError::InvariantViolation("n_subsets must be at least 1".to_string()));
    }
    let mut rng = seeded(derive_seed(seed, "kid"));
    let mut values = Vec::with_capacity(n_subsets);
    for _ in 0..n_subsets {
        let xi = rand::seq::index::sample(&mut rng, x.count(), subset_size);
        let yi = rand::seq::index::sample(&mut rng, y.count(), subset_size);
        let xs: Vec<&[f32]> = xi.iter().map(|i| x.row(i)).collect();
        let ys: Vec<&[f32]> = yi.iter().map(|i| y.row(i)).collect();
        values.push(mmd2_unbiased(&xs, &ys));
    }
    let mean = values.iter().sum::<f64>() / n_subsets as f64;
    let std = if n_subsets > 1 {
        libm::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n_subsets - 1) as f64)
    } else {
        0.0
    };
    Ok(KidEstimate { mean, std, subset_size, n_subsets })
}

/// KID with `subset_size = min(1000, n)` and 100 subsets.
pub fn kid_default(x: &FeatureSet, y: &FeatureSet, seed: u64) -> Result<KidEstimate, MetricsError> {
    let size = KID_DEFAULT_SUBSET_SIZE.min(x.count()).min(y.count());
    kid(x, y, size, KID_DEFAULT_SUBSETS, seed)
}

// ---------------------------------------------------------------------------
// Precision / recall

pub const DEFAULT_PR_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub k: usize,
}

fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum()
}

/// Squared distance from each row to its k-th nearest other row.
pub fn knn_radii(set: &FeatureSet, k: usize) -> Vec<f64> {
    let n = set.count();
    let mut dists = Vec::with_capacity(n.saturating_sub(1));
    (0..n)
        .map(|i| {
            dists.clear();
            dists.extend((0..n).filter(|&j| j != i).map(|j| squared_distance(set.row(i), set.row(j))));
            let (_, kth, _) = dists.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect()
}

/// Fraction of `query` rows inside at least one k-NN ball of `support`.
fn manifold_coverage(support: &FeatureSet, radii: &[f64], query: &FeatureSet) -> f64 {
    let inside = query
        .rows()
        .filter(|q| support.rows().zip(radii).any(|(s, &r)| squared_distance(q, s) <= r))
        .count();
    inside as f64 / query.count() as f64
}

/// k-NN manifold precision (fake rows inside the real manifold) and recall
/// (real rows inside the fake manifold).
pub fn precision_recall(real: &FeatureSet, fake: &FeatureSet, k: usize) -> Result<PrecisionRecall, MetricsError> {
    if real.dim() != fake.dim() {
        return Err(MetricsError::DimMismatch(real.dim(), fake.dim()));
    }
    let limit = real.count().min(fake.count());
    if k == 0 || k >= limit {
        return Err(MetricsError::KTooLarge { k, limit });
    }
    let real_radii = knn_radii(real, k);
    let fake_radii = knn_radii(fake, k);
    Ok(PrecisionRecall {
        precision: manifold_coverage(real, &real_radii, fake),
        recall: manifold_coverage(fake, &fake_radii, real),
        k,
    })
}

// ---------------------------------------------------------------------------
// Patch-FID

/// Maps an image patch to a feature vector.
pub trait PatchFeaturizer {
    fn extractor_id(&self) -> String;
    fn dim(&self) -> usize;
    fn featurize(&self, patch: &Patch) -> Vec<f32>;
}

/// Box-pools a patch onto a `grid x grid` lattice and flattens it. With
/// `grid == patch size` this is the raw pixel vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PooledPixels {
    pub grid: usize,
}

impl PatchFeaturizer for PooledPixels {
    fn extractor_id(&self) -> String {
        format!("pooled-pixels-{}", self.grid)
    }

    fn dim(&self) -> usize {
        self.grid * self.grid
    }

    /// Panics if `grid` does not divide the patch size.
    fn featurize(&self, patch: &Patch) -> Vec<f32> {
        let (g, size) = (self.grid, patch.size);
        assert!(g > 0 && size % g == 0, "grid {g} must divide patch size {size}");
        let cell = size / g;
        let mut sums = vec![0.0f64; g * g];
        for r in 0..size {
            for c in 0..size {
                sums[(r / cell) * g + c / cell] += f64::from(patch.data[r * size + c]);
            }
        }
        let inv = 1.0 / (cell * cell) as f64;
        sums.into_iter().map(|s| (s * inv) as f32).collect()
    }
}

/// Pooled pixels projected onto the leading principal directions of a
/// reference patch set.
#[derive(Debug, Clone)]
pub struct PcaProjection {
    pub pooled: PooledPixels,
    pub directions: PcaDirections,
}

impl PcaProjection {
    pub fn fit(patches: &[Patch], grid: usize, k: usize) -> Result<Self, MetricsError> {
        let pooled = PooledPixels { grid };
        if patches.is_empty() {
            return Err(MetricsError::EmptyInput);
        }
        let d = pooled.dim();
        let mut flat = Vec::with_capacity(patches.len() * d);
        for p in patches {
            flat.extend(pooled.featurize(p).into_iter().map(f64::from));
        }
        let bank = LatentBank::new(Matrix::from_row_major(patches.len(), d, flat), "patch-pixels")?;
        Ok(PcaProjection { pooled, directions: pca(&bank, k)? })
    }
}

impl PatchFeaturizer for PcaProjection {
    fn extractor_id(&self) -> String {
        format!("pca{}-pooled-{}", self.directions.k(), self.pooled.grid)
    }

    fn dim(&self) -> usize {
        self.directions.k()
    }

    fn featurize(&self, patch: &Patch) -> Vec<f32> {
        let x: Vec<f64> = self.pooled.featurize(patch).into_iter().map(f64::from).collect();
        self.directions.project(&x).into_iter().map(|v| v as f32).collect()
    }
}

/// Featurizes a patch list into a [`FeatureSet`].
pub fn featurize_patches<F: PatchFeaturizer + ?Sized>(patches: &[Patch], featurizer: &F) -> Result<FeatureSet, MetricsError> {
    if patches.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let dim = featurizer.dim();
    let mut rows = Vec::with_capacity(patches.len() * dim);
    let mut ids = Vec::with_capacity(patches.len());
    for (i, p) in patches.iter().enumerate() {
        let f = featurizer.featurize(p);
        if f.len() != dim {
            return Err(MetricsError::DimMismatch(dim, f.len()));
        }
        rows.extend_from_slice(&f);
        ids.push(format!("p{i}@{},{}", p.origin.0, p.origin.1));
    }
    Ok(FeatureSet::new(featurizer.extractor_id(), dim, rows, ids)?)
}

/// FID between featurized random patches of two corpora.
///
/// Both sides are sampled with the same `seed`, so identical corpora give 0.
pub fn patch_fid<F: PatchFeaturizer + ?Sized>(
    real: &[NormalizedImage],
    fake: &[NormalizedImage],
    size: usize,
    n_patches: usize,
    featurizer: &F,
    seed: u64,
) -> Result<f64, MetricsError> {
    if real.is_empty() || fake.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let real_feats = featurize_patches(&sample_corpus_patches(real, size, n_patches, seed)?, featurizer)?;
    let fake_feats = featurize_patches(&sample_corpus_patches(fake, size, n_patches, seed)?, featurizer)?;
    fid(&real_feats, &fake_feats)
}

// ---------------------------------------------------------------------------
// Pixel histograms

#[derive(Debug, Clone, PartialEq)]
pub struct PixelHistogram {
    pub bins: [u64; 256],
    pub total: u64,
    pub mean_pixel: f64,
}

impl PixelHistogram {
    pub fn from_bins(bins: [u64; 256]) -> Result<Self, MetricsError> {
        let total: u64 = bins.iter().sum();
        if total == 0 {
            return Err(MetricsError::EmptyInput);
        }
        let weighted: f64 = bins.iter().enumerate().map(|(v, &c)| v as f64 * c as f64).sum();
        Ok(PixelHistogram { bins, total, mean_pixel: weighted / total as f64 })
    }

    /// Bin counts divided by the total.
    pub fn density(&self) -> Vec<f64> {
        self.bins.iter().map(|&c| c as f64 / self.total as f64).collect()
    }

    /// L1 distance between normalized histograms, in `[0, 2]`.
    pub fn l1_distance(&self, other: &PixelHistogram) -> f64 {
        self.density().iter().zip(other.density()).map(|(a, b)| (a - b).abs()).sum()
    }
}

/// 256-bin histogram over every pixel of every image.
pub fn pixel_histogram(images: &[GrayU8]) -> Result<PixelHistogram, MetricsError> {
    let mut bins = [0u64; 256];
    for img in images {
        for &v in &img.data {
            bins[v as usize] += 1;
        }
    }
    PixelHistogram::from_bins(bins)
}

/// Fractions of pixels below and at-or-above `cutoff`.
pub fn tail_mass(h: &PixelHistogram, cutoff: u32) -> Result<(f64, f64), MetricsError> {
    if cutoff > 255 {
        return Err(MetricsError::BadCutoff(cutoff));
    }
    let left: u64 = h.bins[..cutoff as usize].iter().sum();
    let right = h.total - left;
    Ok((left as f64 / h.total as f64, right as f64 / h.total as f64))
}

// ---------------------------------------------------------------------------
// Reports

/// Canonical metric names used in reports and tables.
pub mod names {
    pub const FID: &str = "FID";
    pub const RFID: &str = "rFID";
    pub const KID: &str = "KID";
    pub const KID_STD: &str = "KID-std";
    pub const CLIP_FID: &str = "CLIP-FID";
    pub const FID_P64: &str = "FID-p64";
    pub const FID_P128: &str = "FID-p128";
    pub const FID_P256: &str = "FID-p256";
    pub const PRECISION: &str = "precision";
    pub const RECALL: &str = "recall";
    pub const MAE_IN_FD: &str = "MAE-IN-FD";
    pub const MAE_SOL_FD: &str = "MAE-SOL-FD";
    pub const VIC_IN_FD: &str = "VIC-IN-FD";
    pub const VIC_SOL_FD: &str = "VIC-SOL-FD";

    /// Metrics that are Fréchet distances and therefore non-negative.
    pub fn is_frechet(name: &str) -> bool {
        name.ends_with("FID") || name.ends_with("-FD") || name.starts_with("FID-p")
    }
}

/// Named metric values for one model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricReport {
    pub model_id: String,
    pub values: BTreeMap<String, f64>,
    /// Parameters that produced the values (seeds, k, subset sizes, ...).
    pub params: BTreeMap<String, String>,
}

impl MetricReport {
    pub fn new(model_id: impl Into<String>) -> Self {
        MetricReport { model_id: model_id.into(), ..Default::default() }
    }

    /// Inserts a value, snapping rounding-level negative distances to 0.
    pub fn insert(&mut self, name: &str, value: f64) -> Result<(), MetricsError> {
        let value = if names::is_frechet(name) && (-1e-6..0.0).contains(&value) { 0.0 } else { value };
        self.values.insert(name.to_string(), value);
        self.validate()
    }

    pub fn set_param(&mut self, name: &str, value: impl ToString) {
        self.params.insert(name.to_string(), value.to_string());
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        for (name, &v) in &self.values {
            if !v.is_finite() {
                return Err(MetricsError::InvariantViolation(format!("{name} is not finite")));
            }
            if (name == names::PRECISION || name == names::RECALL) && !(0.0..=1.0).contains(&v) {
                return Err(MetricsError::InvariantViolation(format!("{name} = {v} outside [0, 1]")));
            }
            if names::is_frechet(name) && v < 0.0 {
                return Err(MetricsError::InvariantViolation(format!("{name} = {v} is negative")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::standard_normal;

    fn set(rows: &[Vec<f32>]) -> FeatureSet {
        FeatureSet::from_rows("test", rows).unwrap()
    }

    fn random_set(n: usize, d: usize, shift: f32, seed: u64) -> FeatureSet {
        let mut rng = seeded(seed);
        let rows: Vec<Vec<f32>> =
            (0..n).map(|_| (0..d).map(|_| standard_normal(&mut rng) as f32 + shift).collect()).collect();
        set(&rows)
    }

    fn stats_1d(mu: f64, var: f64) -> GaussianStats {
        GaussianStats::new(vec![mu], Matrix::from_row_major(1, 1, vec![var]), 10).unwrap()
    }

    #[test]
    fn two_point_covariance() {
        let g = gaussian_stats(&set(&[vec![0.0], vec![2.0]])).unwrap();
        assert_eq!(g.mean(), &[1.0]);
        assert_eq!(g.cov()[(0, 0)], 2.0);
    }

    #[test]
    fn identical_rows_have_zero_covariance() {
        let g = gaussian_stats(&set(&vec![vec![1.0, -2.0, 3.0]; 4])).unwrap();
        assert!(g.cov().as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(
            gaussian_stats(&set(&[vec![1.0]])),
            Err(MetricsError::TooFewSamples { needed: 2, got: 1 })
        );
    }

    #[test]
    fn sampled_covariance_is_close_to_truth() {
        let sd = [1.0, 2.0, 0.5];
        let mut rng = seeded(5);
        let rows: Vec<Vec<f32>> =
            (0..500).map(|_| sd.iter().map(|s| (s * standard_normal(&mut rng)) as f32).collect()).collect();
        let g = gaussian_stats(&set(&rows)).unwrap();
        for (i, s) in sd.iter().enumerate() {
            let truth = s * s;
            assert!((g.cov()[(i, i)] - truth).abs() <= 0.15 * truth, "var {i}: {}", g.cov()[(i, i)]);
            for j in 0..3 {
                if j != i {
                    // off-diagonal truth is 0; 15% of the smaller variance
                    assert!(g.cov()[(i, j)].abs() <= 0.15 * (sd[i] * sd[j]).max(0.25) * 1.5);
                }
            }
        }
    }

    #[test]
    fn sqrtm_cases() {
        assert_eq!(sqrtm_psd(&Matrix::identity(3)).unwrap(), Matrix::identity(3));
        let s = sqrtm_psd(&Matrix::from_diagonal(&[4.0, 9.0])).unwrap();
        assert!((s[(0, 0)] - 2.0).abs() < 1e-15 && (s[(1, 1)] - 3.0).abs() < 1e-15);
        assert!(s[(0, 1)].abs() < 1e-15);
        let asym = Matrix::from_row_major(2, 2, vec![1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(sqrtm_psd(&asym), Err(MetricsError::NotSymmetric(_))));
        let indefinite = Matrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(sqrtm_psd(&indefinite), Err(MetricsError::NotPsd(_))));
        assert_eq!(sqrtm_psd(&Matrix::zeros(2, 2)).unwrap(), Matrix::zeros(2, 2));
    }

    #[test]
    fn frechet_closed_forms() {
        let a = stats_1d(0.0, 1.0);
        assert_eq!(frechet_distance(&a, &a).unwrap(), 0.0);
        assert!((frechet_distance(&a, &stats_1d(1.0, 1.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!((frechet_distance(&a, &stats_1d(0.0, 4.0)).unwrap() - 1.0).abs() < 1e-12);
        let wide = GaussianStats::new(vec![0.0, 0.0], Matrix::identity(2), 3).unwrap();
        assert_eq!(frechet_distance(&a, &wide), Err(MetricsError::DimMismatch(1, 2)));
    }

    #[test]
    fn frechet_is_symmetric_and_zero_on_self() {
        let x = random_set(60, 6, 0.0, 1);
        let y = random_set(70, 6, 0.3, 2);
        let (gx, gy) = (gaussian_stats(&x).unwrap(), gaussian_stats(&y).unwrap());
        let ab = frechet_distance(&gx, &gy).unwrap();
        let ba = frechet_distance(&gy, &gx).unwrap();
        assert!((ab - ba).abs() <= 1e-6 * (1.0 + ab));
        assert!(frechet_distance(&gx, &gx).unwrap() < 1e-9);
    }

    #[test]
    fn kid_hand_case_is_seven() {
        let x = set(&vec![vec![0.0; 4]; 5]);
        let y = set(&vec![vec![2.0, 0.0, 0.0, 0.0]; 5]);
        let est = kid(&x, &y, 5, 1, 0).unwrap();
        assert_eq!(est.mean, 7.0);
        assert_eq!(est.std, 0.0);
    }

    #[test]
    fn kid_of_identical_constant_sets_is_zero() {
        let x = set(&vec![vec![0.3, -1.0, 2.0]; 8]);
        let est = kid(&x, &x, 8, 3, 9).unwrap();
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn kid_errors() {
        let x = random_set(10, 3, 0.0, 1);
        let y = random_set(5, 3, 0.0, 2);
        assert_eq!(kid(&x, &y, 6, 1, 0), Err(MetricsError::SubsetTooLarge { subset_size: 6, available: 5 }));
        let z = random_set(5, 2, 0.0, 2);
        assert_eq!(kid(&x, &z, 3, 1, 0), Err(MetricsError::DimMismatch(3, 2)));
        let d = kid_default(&x, &y, 4).unwrap();
        assert_eq!((d.subset_size, d.n_subsets), (5, 100));
    }

    #[test]
    fn precision_recall_identity_and_separation() {
        let x = random_set(30, 4, 0.0, 3);
        let pr = precision_recall(&x, &x, 3).unwrap();
        assert_eq!((pr.precision, pr.recall), (1.0, 1.0));
        let far = random_set(30, 4, 1000.0, 4);
        let pr = precision_recall(&x, &far, 3).unwrap();
        assert_eq!((pr.precision, pr.recall), (0.0, 0.0));
        assert_eq!(precision_recall(&x, &far, 30), Err(MetricsError::KTooLarge { k: 30, limit: 30 }));
        assert_eq!(precision_recall(&x, &far, 0), Err(MetricsError::KTooLarge { k: 0, limit: 30 }));
    }

    #[test]
    fn histogram_and_tails() {
        let seven = GrayU8 { width: 2, height: 2, data: vec![7; 4] };
        let h = pixel_histogram(std::slice::from_ref(&seven)).unwrap();
        assert_eq!(h.bins[7], h.total);
        assert_eq!(h.mean_pixel, 7.0);
        assert_eq!(h.l1_distance(&pixel_histogram(&[seven]).unwrap()), 0.0);
        assert_eq!(tail_mass(&h, 0).unwrap(), (0.0, 1.0));
        assert_eq!(tail_mass(&h, 150).unwrap(), (1.0, 0.0));
        assert_eq!(tail_mass(&h, 256), Err(MetricsError::BadCutoff(256)));

        let black = GrayU8 { width: 1, height: 1, data: vec![0] };
        let white = GrayU8 { width: 1, height: 1, data: vec![255] };
        assert_eq!(pixel_histogram(&[black, white]).unwrap().mean_pixel, 127.5);
        assert_eq!(pixel_histogram(&[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn pooled_pixels() {
        let patch = Patch { data: vec![0.0, 1.0, 0.5, 0.5], origin: (0, 0), size: 2 };
        assert_eq!(PooledPixels { grid: 1 }.featurize(&patch), vec![0.5]);
        assert_eq!(PooledPixels { grid: 2 }.featurize(&patch), patch.data);
    }

    #[test]
    fn report_clamps_and_validates() {
        let mut r = MetricReport::new("m");
        r.insert(names::FID, -1e-9).unwrap();
        assert_eq!(r.get(names::FID), Some(0.0));
        assert!(r.insert(names::PRECISION, 1.5).is_err());
        let mut r = MetricReport::new("m");
        assert!(r.insert(names::FID_P64, -1.0).is_err());
        assert!(names::is_frechet("VIC-SOL-FD") && names::is_frechet("rFID") && !names::is_frechet("KID"));
    }
}

//! Feature matrices exchanged with neural feature extractors.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Extractor id whose rows must be 2048-dimensional (Inception-v3 pool3).
pub const INCEPTION_POOL3: &str = "inception-v3-pool3";
pub const INCEPTION_POOL3_DIM: usize = 2048;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("non-finite value in row {row}")]
    NonFiniteValue { row: usize },
    #[error("extractor mismatch: {0} vs {1}")]
    ExtractorMismatch(String, String),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
}

/// An `n x d` matrix of single-precision embeddings, one row per sample.
///
/// Invariants: `n >= 1`, `d >= 1`, every value finite, one sample id per row,
/// and `d == 2048` for the Inception pool3 extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    extractor_id: String,
    dim: usize,
    rows: Vec<f32>,
    sample_ids: Vec<String>,
}

impl FeatureSet {
    /// `rows` is row-major, `sample_ids.len() * dim` long.
    pub fn new(
        extractor_id: impl Into<String>,
        dim: usize,
        rows: Vec<f32>,
        sample_ids: Vec<String>,
    ) -> Result<Self, FeatureError> {
        let extractor_id = extractor_id.into();
        let inv = |m: String| Err(FeatureError::InvariantViolation(m));
        if dim == 0 {
            return inv("dim must be at least 1".to_string());
        }
        if sample_ids.is_empty() {
            return inv("a feature set needs at least one row".to_string());
        }
        if rows.len() != sample_ids.len() * dim {
            return inv(format!("{} values for {} rows of dim {dim}", rows.len(), sample_ids.len()));
        }
        if extractor_id == INCEPTION_POOL3 && dim != INCEPTION_POOL3_DIM {
            return inv(format!("{INCEPTION_POOL3} features must have dim {INCEPTION_POOL3_DIM}, got {dim}"));
        }
        if let Some(pos) = rows.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFiniteValue { row: pos / dim });
        }
        Ok(FeatureSet { extractor_id, dim, rows, sample_ids })
    }

    /// Builds a set from per-row vectors; ids default to the row index.
    pub fn from_rows(extractor_id: impl Into<String>, rows: &[Vec<f32>]) -> Result<Self, FeatureError> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(FeatureError::InvariantViolation(format!("row {i} has length {}, expected {dim}", r.len())));
        }
        let ids = (0..rows.len()).map(|i| format!("{i}")).collect();
        FeatureSet::new(extractor_id, dim, rows.concat(), ids)
    }

    pub fn extractor_id(&self) -> &str {
        &self.extractor_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.rows.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f32] {
        &self.rows
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    /// Subset by row index; indices may repeat.
    pub fn select(&self, indices: &[usize]) -> Result<FeatureSet, FeatureError> {
        let mut rows = Vec::with_capacity(indices.len() * self.dim);
        let mut ids = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.count() {
                return Err(FeatureError::InvariantViolation(format!("row {i} out of range")));
            }
            rows.extend_from_slice(self.row(i));
            ids.push(self.sample_ids[i].clone());
        }
        FeatureSet::new(self.extractor_id.clone(), self.dim, rows, ids)
    }

    /// Applies the same coordinate permutation to every row.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<FeatureSet, FeatureError> {
        let mut seen = alloc::vec![false; self.dim];
        if perm.len() != self.dim || !perm.iter().all(|&p| p < self.dim && !core::mem::replace(&mut seen[p], true)) {
            return Err(FeatureError::InvariantViolation("not a permutation of the columns".to_string()));
        }
        let rows = self.rows().flat_map(|r| perm.iter().map(move |&p| r[p])).collect();
        FeatureSet::new(self.extractor_id.clone(), self.dim, rows, self.sample_ids.clone())
    }
}

/// Stacks `a` then `b`.
pub fn concat(a: &FeatureSet, b: &FeatureSet) -> Result<FeatureSet, FeatureError> {
    if a.extractor_id != b.extractor_id {
        return Err(FeatureError::ExtractorMismatch(a.extractor_id.clone(), b.extractor_id.clone()));
    }
    if a.dim != b.dim {
        return Err(FeatureError::DimMismatch(a.dim, b.dim));
    }
    let mut rows = a.rows.clone();
    rows.extend_from_slice(&b.rows);
    let mut ids = a.sample_ids.clone();
    ids.extend_from_slice(&b.sample_ids);
    FeatureSet::new(a.extractor_id.clone(), a.dim, rows, ids)
}

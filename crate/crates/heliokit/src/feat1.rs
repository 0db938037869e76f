//! FEAT1, the binary feature-matrix format shared with the extractor bridge.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "FEAT" 0x31 | u16 version = 1 | u16 len + UTF-8 extractor id | u32 dim | u64 count
//! count x ( u16 len + UTF-8 sample id | dim x f32 )
//! ```

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use heliokit_core::{FeatureError, FeatureSet};

pub const MAGIC: [u8; 5] = *b"FEAT1";
pub const VERSION: u16 = 1;

#[derive(Debug, thiserror::Error)]
pub enum FeatError {
    #[error("not a FEAT1 stream")]
    BadMagic,
    #[error("unsupported FEAT1 version {0}")]
    UnsupportedVersion(u16),
    #[error("corrupt length: {0}")]
    CorruptLength(String),
    #[error("non-finite value in row {row}")]
    NonFiniteValue { row: usize },
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("io failure: {0}")]
    IoFailure(#[from] io::Error),
}

impl From<FeatureError> for FeatError {
    fn from(e: FeatureError) -> Self {
        match e {
            FeatureError::NonFiniteValue { row } => FeatError::NonFiniteValue { row },
            other => FeatError::InvariantViolation(other.to_string()),
        }
    }
}

fn short_string(s: &str, what: &str) -> Result<u16, FeatError> {
    u16::try_from(s.len()).map_err(|_| FeatError::InvariantViolation(format!("{what} longer than 65535 bytes")))
}

/// Serializes a feature set.
pub fn write_features<W: Write>(fs: &FeatureSet, sink: W) -> Result<(), FeatError> {
    let rows: Vec<&[f32]> = fs.rows().collect();
    write_rows(fs.extractor_id(), fs.dim(), fs.sample_ids(), &rows, sink)
}

/// Serializes loose rows. Everything is validated before the first byte is
/// written, so a bad input leaves the sink untouched.
pub fn write_rows<W: Write>(extractor_id: &str, dim: usize, ids: &[String], rows: &[&[f32]], sink: W) -> Result<(), FeatError> {
    let inv = |m: String| Err(FeatError::InvariantViolation(m));
    if rows.is_empty() {
        return inv("a feature set needs at least one row".into());
    }
    if ids.len() != rows.len() {
        return inv(format!("{} ids for {} rows", ids.len(), rows.len()));
    }
    let dim32 = u32::try_from(dim).map_err(|_| FeatError::InvariantViolation(format!("dim {dim} exceeds u32")))?;
    if dim == 0 {
        return inv("dim must be at least 1".into());
    }
    let id_len = short_string(extractor_id, "extractor id")?;
    for (i, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return inv(format!("row {i} has {} values, expected {dim}", row.len()));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(FeatError::NonFiniteValue { row: i });
        }
        short_string(&ids[i], "sample id")?;
    }

    let mut w = BufWriter::new(sink);
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&id_len.to_le_bytes())?;
    w.write_all(extractor_id.as_bytes())?;
    w.write_all(&dim32.to_le_bytes())?;
    w.write_all(&(rows.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(dim * 4);
    for (id, row) in ids.iter().zip(rows) {
        w.write_all(&(id.len() as u16).to_le_bytes())?;
        w.write_all(id.as_bytes())?;
        buf.clear();
        for v in *row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    w.flush()?;
    Ok(())
}

/// Incremental reader: the header is parsed up front, rows on demand.
pub struct FeatReader<R> {
    inner: R,
    extractor_id: String,
    dim: usize,
    count: u64,
    next_row: u64,
    failed: bool,
}

fn read_exact_or_corrupt<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<(), FeatError> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FeatError::CorruptLength(format!("stream ends inside {what}")),
        _ => FeatError::IoFailure(e),
    })
}

fn read_u16<R: Read>(r: &mut R, what: &str) -> Result<u16, FeatError> {
    let mut b = [0u8; 2];
    read_exact_or_corrupt(r, &mut b, what)?;
    Ok(u16::from_le_bytes(b))
}

fn read_string<R: Read>(r: &mut R, what: &str) -> Result<String, FeatError> {
    let len = read_u16(r, what)? as usize;
    let mut bytes = vec![0u8; len];
    read_exact_or_corrupt(r, &mut bytes, what)?;
    String::from_utf8(bytes).map_err(|_| FeatError::InvariantViolation(format!("{what} is not UTF-8")))
}

impl<R: Read> FeatReader<R> {
    pub fn new(mut inner: R) -> Result<Self, FeatError> {
        let mut magic = [0u8; 5];
        match inner.read_exact(&mut magic) {
            Ok(()) if magic == MAGIC => {}
            Ok(()) => return Err(FeatError::BadMagic),
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Err(FeatError::BadMagic),
            Err(e) => return Err(e.into()),
        }
        let version = read_u16(&mut inner, "header")?;
        if version != VERSION {
            return Err(FeatError::UnsupportedVersion(version));
        }
        let extractor_id = read_string(&mut inner, "extractor id")?;
        let mut b4 = [0u8; 4];
        read_exact_or_corrupt(&mut inner, &mut b4, "header")?;
        let dim = u32::from_le_bytes(b4) as usize;
        let mut b8 = [0u8; 8];
        read_exact_or_corrupt(&mut inner, &mut b8, "header")?;
        let count = u64::from_le_bytes(b8);
        if dim == 0 {
            return Err(FeatError::CorruptLength("dim is 0".into()));
        }
        if count == 0 {
            return Err(FeatError::InvariantViolation("count is 0".into()));
        }
        Ok(FeatReader { inner, extractor_id, dim, count, next_row: 0, failed: false })
    }

    pub fn extractor_id(&self) -> &str {
        &self.extractor_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row_count(&self) -> u64 {
        self.count
    }

    fn read_row(&mut self) -> Result<(String, Vec<f32>), FeatError> {
        let row = self.next_row as usize;
        let id = read_string(&mut self.inner, "sample id")?;
        let mut bytes = vec![0u8; self.dim * 4];
        read_exact_or_corrupt(&mut self.inner, &mut bytes, "row data")?;
        let values: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FeatError::NonFiniteValue { row });
        }
        Ok((id, values))
    }

    /// Errors if bytes follow the last record.
    pub fn finish(mut self) -> Result<(), FeatError> {
        if self.next_row != self.count {
            return Err(FeatError::InvariantViolation(format!("{} of {} rows consumed", self.next_row, self.count)));
        }
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe)? {
            0 => Ok(()),
            _ => Err(FeatError::CorruptLength("trailing bytes after the last record".into())),
        }
    }
}

impl<R: Read> Iterator for FeatReader<R> {
    type Item = Result<(String, Vec<f32>), FeatError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.next_row >= self.count {
            return None;
        }
        let out = self.read_row();
        match out {
            Ok(_) => self.next_row += 1,
            Err(_) => self.failed = true,
        }
        Some(out)
    }
}

/// Reads a whole stream into a [`FeatureSet`].
pub fn read_features<R: Read>(source: R) -> Result<FeatureSet, FeatError> {
    let mut reader = FeatReader::new(source)?;
    let (dim, count) = (reader.dim(), reader.row_count());
    // Do not trust the header for the allocation size.
    let cap = count.min(1 << 16) as usize;
    let mut flat = Vec::with_capacity(cap.saturating_mul(dim).min(1 << 24));
    let mut ids = Vec::with_capacity(cap);
    for row in reader.by_ref() {
        let (id, values) = row?;
        ids.push(id);
        flat.extend_from_slice(&values);
    }
    let extractor_id = reader.extractor_id().to_string();
    reader.finish()?;
    Ok(FeatureSet::new(extractor_id, dim, flat, ids)?)
}

pub fn read_features_file(path: &Path) -> Result<FeatureSet, FeatError> {
    read_features(BufReader::new(File::open(path)?))
}

pub fn write_features_file(path: &Path, fs: &FeatureSet) -> Result<(), FeatError> {
    write_features(fs, File::create(path)?)
}

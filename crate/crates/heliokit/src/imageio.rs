//! Image tiles on disk: HTIL float tiles, 8-bit PNG and folders of either.
//!
//! HTIL layout: `"HTIL" | u32 width | u32 height | width*height x f32`, all
//! little-endian, row-major.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use heliokit_core::imageprep::quantize_u8;
use heliokit_core::{NormalizedImage, PrepError};

pub const HTIL_MAGIC: [u8; 4] = *b"HTIL";

#[derive(Debug, thiserror::Error)]
pub enum ImageIoError {
    #[error("not an HTIL tile")]
    BadMagic,
    #[error("corrupt length: {0}")]
    CorruptLength(String),
    #[error("invalid image: {0}")]
    Invalid(String),
    #[error("unsupported image file {0}")]
    UnsupportedExtension(PathBuf),
    #[error("png: {0}")]
    Png(#[from] image::ImageError),
    #[error("io failure: {0}")]
    Io(#[from] io::Error),
}

impl From<PrepError> for ImageIoError {
    fn from(e: PrepError) -> Self {
        ImageIoError::Invalid(e.to_string())
    }
}

/// Output encoding for image corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TileFormat {
    Htil,
    Png,
    Both,
}

pub fn write_htil<W: Write>(img: &NormalizedImage, mut sink: W) -> Result<(), ImageIoError> {
    let dims = |n: usize| u32::try_from(n).map_err(|_| ImageIoError::Invalid(format!("dimension {n} exceeds u32")));
    let mut buf = Vec::with_capacity(12 + 4 * img.data().len());
    buf.extend_from_slice(&HTIL_MAGIC);
    buf.extend_from_slice(&dims(img.width())?.to_le_bytes());
    buf.extend_from_slice(&dims(img.height())?.to_le_bytes());
    for v in img.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    sink.write_all(&buf)?;
    Ok(())
}

pub fn read_htil<R: Read>(mut source: R, source_id: &str) -> Result<NormalizedImage, ImageIoError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    if bytes.len() < 4 || bytes[..4] != HTIL_MAGIC {
        return Err(ImageIoError::BadMagic);
    }
    if bytes.len() < 12 {
        return Err(ImageIoError::CorruptLength("header shorter than 12 bytes".into()));
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = width.checked_mul(height).and_then(|n| n.checked_mul(4)).and_then(|n| n.checked_add(12));
    if expected != Some(bytes.len()) {
        return Err(ImageIoError::CorruptLength(format!("{} bytes for a {width}x{height} tile", bytes.len())));
    }
    let data = bytes[12..].chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    Ok(NormalizedImage::new(width, height, data, source_id)?)
}

/// Quantizes to 8 bits (`round(255 v)`) and encodes as grayscale PNG.
pub fn png_bytes(img: &NormalizedImage) -> Result<Vec<u8>, ImageIoError> {
    let q = quantize_u8(img);
    let gray = image::GrayImage::from_raw(q.width as u32, q.height as u32, q.data)
        .ok_or_else(|| ImageIoError::Invalid("pixel buffer does not match dimensions".into()))?;
    let mut out = io::Cursor::new(Vec::new());
    gray.write_to(&mut out, image::ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// Decodes any PNG, converting to 8-bit luma and scaling to `[0, 1]`.
pub fn read_png(bytes: &[u8], source_id: &str) -> Result<NormalizedImage, ImageIoError> {
    let gray = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?.into_luma8();
    let (w, h) = gray.dimensions();
    let data = gray.into_raw().into_iter().map(|v| f32::from(v) / 255.0).collect();
    Ok(NormalizedImage::new(w as usize, h as usize, data, source_id)?)
}

fn extension(path: &Path) -> Option<String> {
    path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase)
}

pub fn is_image_file(path: &Path) -> bool {
    matches!(extension(path).as_deref(), Some("htil" | "png"))
}

/// Loads a `.htil` or `.png` file; the source id is the file name.
pub fn load_image(path: &Path) -> Result<NormalizedImage, ImageIoError> {
    let id = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    match extension(path).as_deref() {
        Some("htil") => read_htil(io::BufReader::new(fs::File::open(path)?), &id),
        Some("png") => read_png(&fs::read(path)?, &id),
        _ => Err(ImageIoError::UnsupportedExtension(path.to_path_buf())),
    }
}

/// Image files directly inside `dir`, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>, ImageIoError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.is_file() && is_image_file(p));
    paths.sort();
    Ok(paths)
}

pub fn load_folder(dir: &Path) -> Result<Vec<NormalizedImage>, ImageIoError> {
    use rayon::prelude::*;
    list_images(dir)?.par_iter().map(|p| load_image(p)).collect()
}

/// Writes `img` as `<stem>.htil` and/or `<stem>.png` under `dir`, returning
/// the written paths.
pub fn save_tile(img: &NormalizedImage, dir: &Path, stem: &str, format: TileFormat) -> Result<Vec<PathBuf>, ImageIoError> {
    let mut written = Vec::new();
    if matches!(format, TileFormat::Htil | TileFormat::Both) {
        let path = dir.join(format!("{stem}.htil"));
        let mut buf = Vec::new();
        write_htil(img, &mut buf)?;
        fs::write(&path, buf)?;
        written.push(path);
    }
    if matches!(format, TileFormat::Png | TileFormat::Both) {
        let path = dir.join(format!("{stem}.png"));
        fs::write(&path, png_bytes(img)?)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn htil_header_is_little_endian() {
        let img = NormalizedImage::new(2, 1, vec![0.0, 1.0], "t").unwrap();
        let mut buf = Vec::new();
        write_htil(&img, &mut buf).unwrap();
        assert_eq!(&buf[..12], b"HTIL\x02\x00\x00\x00\x01\x00\x00\x00");
        assert_eq!(&buf[16..], &1.0f32.to_le_bytes());
    }

    #[test]
    fn htil_rejects_out_of_range_pixels() {
        let mut buf = b"HTIL\x01\x00\x00\x00\x01\x00\x00\x00".to_vec();
        buf.extend_from_slice(&2.0f32.to_le_bytes());
        assert!(matches!(read_htil(buf.as_slice(), "t"), Err(ImageIoError::Invalid(_))));
    }

    #[test]
    fn png_survives_quantization_exactly() {
        let data: Vec<f32> = (0..=255u8).map(|v| f32::from(v) / 255.0).collect();
        let img = NormalizedImage::new(16, 16, data, "ramp").unwrap();
        let back = read_png(&png_bytes(&img).unwrap(), "ramp").unwrap();
        assert_eq!(quantize_u8(&back), quantize_u8(&img));
    }
}

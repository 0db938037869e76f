//! Intensity preprocessing, resampling and patch sampling for EUV images.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::rng::{derive_seed, seeded, standard_normal};

/// Saturation level of the detector: raw counts range up to 2^14 - 1.
pub const DEFAULT_MAX_DN: i64 = 16383;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PrepError {
    #[error("max_dn must be at least 1, got {0}")]
    BadMaxDn(i64),
    #[error("factor {factor} does not divide {width}x{height}")]
    NonDivisibleFactor { factor: usize, width: usize, height: usize },
    #[error("patch size {size} exceeds image {width}x{height}")]
    PatchTooLarge { size: usize, width: usize, height: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

/// Floating-point image with every pixel in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
    source_id: String,
}

impl NormalizedImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>, source_id: impl Into<String>) -> Result<Self, PrepError> {
        if data.len() != width * height {
            return Err(PrepError::InvariantViolation(format!(
                "{} pixels for a {width}x{height} image",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(PrepError::InvariantViolation(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(NormalizedImage { width, height, data, source_id: source_id.into() })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }

    pub fn with_source_id(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self
    }
}

/// A square crop of a source image.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub data: Vec<f32>,
    /// `(row, col)` of the top-left pixel in the source image.
    pub origin: (usize, usize),
    pub size: usize,
}

/// 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayU8 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

/// Clip at 1, take the natural log and divide by `ln(max_dn)`.
///
/// Values at or below 1 map to 0 and `max_dn` maps to exactly 1; anything
/// above `max_dn` saturates at 1.
pub fn normalize_intensity(
    raw: &[i64],
    width: usize,
    height: usize,
    max_dn: i64,
    source_id: &str,
) -> Result<NormalizedImage, PrepError> {
    if max_dn < 1 {
        return Err(PrepError::BadMaxDn(max_dn));
    }
    let denom = libm::log(max_dn as f64);
    let data = raw.iter().map(|&v| normalize_value(v, denom)).collect();
    NormalizedImage::new(width, height, data, source_id)
}

/// Same transform, dividing by the log of this image's own maximum instead
/// of a fixed ceiling.
pub fn normalize_intensity_per_image(
    raw: &[i64],
    width: usize,
    height: usize,
    source_id: &str,
) -> Result<NormalizedImage, PrepError> {
    let max = raw.iter().copied().max().unwrap_or(1).max(1);
    normalize_intensity(raw, width, height, max, source_id)
}

fn normalize_value(raw: i64, log_max: f64) -> f32 {
    if raw <= 1 || log_max == 0.0 {
        return 0.0;
    }
    let v = libm::log(raw as f64) / log_max;
    v.clamp(0.0, 1.0) as f32
}

/// Box (area) downsampling: every output pixel is the mean of a
/// `factor x factor` source block.
pub fn downsample_box(img: &NormalizedImage, factor: usize) -> Result<NormalizedImage, PrepError> {
    if factor == 0 || !img.width.is_multiple_of(factor) || !img.height.is_multiple_of(factor) {
        return Err(PrepError::NonDivisibleFactor { factor, width: img.width, height: img.height });
    }
    let (w, h) = (img.width / factor, img.height / factor);
    let mut sums = vec![0.0f64; w * h];
    for row in 0..img.height {
        let src = &img.data[row * img.width..(row + 1) * img.width];
        let dst = &mut sums[(row / factor) * w..(row / factor + 1) * w];
        for (col, &v) in src.iter().enumerate() {
            dst[col / factor] += f64::from(v);
        }
    }
    let inv = 1.0 / (factor * factor) as f64;
    let data = sums.into_iter().map(|s| ((s * inv) as f32).clamp(0.0, 1.0)).collect();
    NormalizedImage::new(w, h, data, img.source_id.clone())
}

/// Resizes a square-ish image so its width becomes `target` by box averaging.
pub fn resize_to(img: &NormalizedImage, target: usize) -> Result<NormalizedImage, PrepError> {
    if target == 0 || !img.width.is_multiple_of(target) {
        return Err(PrepError::NonDivisibleFactor { factor: 0, width: img.width, height: img.height });
    }
    downsample_box(img, img.width / target)
}

fn crop(img: &NormalizedImage, origin: (usize, usize), size: usize) -> Patch {
    let mut data = Vec::with_capacity(size * size);
    for r in origin.0..origin.0 + size {
        let start = r * img.width + origin.1;
        data.extend_from_slice(&img.data[start..start + size]);
    }
    Patch { data, origin, size }
}

/// `count` square patches whose origins are uniform over all valid positions.
pub fn extract_patches(img: &NormalizedImage, size: usize, count: usize, seed: u64) -> Result<Vec<Patch>, PrepError> {
    if size == 0 || size > img.width.min(img.height) {
        return Err(PrepError::PatchTooLarge { size, width: img.width, height: img.height });
    }
    if count == 0 {
        return Err(PrepError::InvariantViolation("patch count must be at least 1".to_string()));
    }
    let mut rng = seeded(seed);
    let (max_row, max_col) = (img.height - size, img.width - size);
    Ok((0..count)
        .map(|_| {
            let row = rng.random_range(0..=max_row);
            let col = rng.random_range(0..=max_col);
            crop(img, (row, col), size)
        })
        .collect())
}

/// Spreads `n_patches` over a corpus and extracts them.
///
/// Each image receives `n_patches / len` patches; the remainder goes to a
/// seeded random subset of images. Each image's origins come from a generator
/// keyed by `(seed, source_id)`.
pub fn sample_corpus_patches(
    images: &[NormalizedImage],
    size: usize,
    n_patches: usize,
    seed: u64,
) -> Result<Vec<Patch>, PrepError> {
    if images.is_empty() {
        return Err(PrepError::EmptyInput);
    }
    if n_patches == 0 {
        return Err(PrepError::InvariantViolation("patch count must be at least 1".to_string()));
    }
    let base = n_patches / images.len();
    let mut counts = vec![base; images.len()];
    let extra = n_patches % images.len();
    if extra > 0 {
        let mut rng = seeded(derive_seed(seed, "patch-allocation"));
        for i in rand::seq::index::sample(&mut rng, images.len(), extra) {
            counts[i] += 1;
        }
    }
    let mut out = Vec::with_capacity(n_patches);
    for (img, &count) in images.iter().zip(&counts) {
        if count > 0 {
            out.extend(extract_patches(img, size, count, derive_seed(seed, &img.source_id))?);
        }
    }
    Ok(out)
}

/// `round(255 x)` with ties to even.
pub fn quantize_u8(img: &NormalizedImage) -> GrayU8 {
    let data = img.data.iter().map(|&v| quantize_value(f64::from(v))).collect();
    GrayU8 { width: img.width, height: img.height, data }
}

pub fn quantize_value(v: f64) -> u8 {
    libm::rint(255.0 * v.clamp(0.0, 1.0)) as u8
}

/// Parameters of the synthetic full-disc generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub resolution: usize,
    /// Disc radius as a fraction of half the image width; in (0, 1).
    pub disc_radius_frac: f64,
    /// Loop systems per limb quadrant.
    pub loop_density: f64,
    pub hole_count: usize,
    /// Standard deviation of additive Gaussian noise.
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams { resolution: 256, disc_radius_frac: 0.8, loop_density: 1.0, hole_count: 2, noise_scale: 0.01, seed: 0 }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), PrepError> {
        let inv = |m: &str| Err(PrepError::InvariantViolation(m.to_string()));
        if self.resolution < 8 {
            return inv("resolution must be at least 8");
        }
        if !(self.disc_radius_frac > 0.0 && self.disc_radius_frac < 1.0) {
            return inv("disc_radius_frac must lie in (0, 1)");
        }
        if !(self.loop_density >= 0.0 && self.loop_density.is_finite()) {
            return inv("loop_density must be finite and non-negative");
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return inv("noise_scale must be finite and non-negative");
        }
        Ok(())
    }

    pub fn source_id(&self) -> String {
        format!("synth-{:016x}", self.seed)
    }
}

const LOOP_STRANDS: usize = 3;
const LOOP_AMPLITUDE: f64 = 0.35;
const HOLE_DEPTH: f64 = 0.7;

/// Renders a deterministic synthetic solar disc.
///
/// The disc is limb-brightened and surrounded by an exponentially fading
/// corona. Coronal holes darken elliptical regions on the disc; loop systems
/// are bundles of thin bright half-ellipses rooted just inside the limb.
pub fn synth_sun(params: &SynthParams) -> Result<NormalizedImage, PrepError> {
    params.validate()?;
    let res = params.resolution;
    let center = res as f64 / 2.0;
    let radius = params.disc_radius_frac * center;
    let corona_scale = 0.06 * res as f64;
    let mut rng = seeded(params.seed);

    let mut img = vec![0.0f64; res * res];
    for i in 0..res {
        let dy = i as f64 + 0.5 - center;
        for j in 0..res {
            let dx = j as f64 + 0.5 - center;
            let rho = libm::sqrt(dx * dx + dy * dy);
            img[i * res + j] = if rho <= radius {
                let t = rho / radius;
                0.55 + 0.12 * t * t
            } else {
                0.05 + 0.35 * libm::exp(-(rho - radius) / corona_scale)
            };
        }
    }

    for _ in 0..params.hole_count {
        let r = 0.7 * radius * libm::sqrt(rng.random::<f64>());
        let phi = core::f64::consts::TAU * rng.random::<f64>();
        let (cx, cy) = (center + r * libm::cos(phi), center + r * libm::sin(phi));
        let a = radius * rng.random_range(0.08..0.2);
        let b = radius * rng.random_range(0.08..0.2);
        let tilt = core::f64::consts::PI * rng.random::<f64>();
        let (ct, st) = (libm::cos(tilt), libm::sin(tilt));
        let reach = a.max(b) * 1.6;
        for_each_in_box(res, cx, cy, reach, |i, j, dx, dy| {
            let u = (dx * ct + dy * st) / a;
            let v = (-dx * st + dy * ct) / b;
            let q = u * u + v * v;
            let mask = libm::exp(-q * q);
            img[i * res + j] *= 1.0 - HOLE_DEPTH * mask;
        });
    }

    let n_systems = libm::round(params.loop_density * 4.0) as usize;
    if n_systems > 0 {
        let mut layer = vec![0.0f64; res * res];
        let sigma = (0.003 * res as f64).max(0.6);
        for _ in 0..n_systems {
            let theta = core::f64::consts::TAU * rng.random::<f64>();
            let half_width = radius * rng.random_range(0.05..0.12);
            let height = radius * rng.random_range(0.06..0.18);
            let (nx, ny) = (libm::cos(theta), libm::sin(theta));
            let (tx, ty) = (-ny, nx);
            let foot = 0.97 * radius;
            for strand in 0..LOOP_STRANDS {
                let scale = 1.0 - 0.18 * strand as f64;
                let (w, h) = (half_width * scale, height * scale);
                let steps = libm::ceil(core::f64::consts::PI * (w + h) / (0.5 * sigma)).max(8.0) as usize;
                for s in 0..=steps {
                    let angle = core::f64::consts::PI * s as f64 / steps as f64;
                    let along = w * libm::cos(angle);
                    let out = h * libm::sin(angle);
                    let px = center + foot * nx + along * tx + out * nx;
                    let py = center + foot * ny + along * ty + out * ny;
                    for_each_in_box(res, px, py, 3.0 * sigma, |i, j, dx, dy| {
                        let g = libm::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                        let cell = &mut layer[i * res + j];
                        if g > *cell {
                            *cell = g;
                        }
                    });
                }
            }
        }
        for (p, l) in img.iter_mut().zip(&layer) {
            *p += LOOP_AMPLITUDE * l;
        }
    }

    if params.noise_scale > 0.0 {
        for p in img.iter_mut() {
            *p += params.noise_scale * standard_normal(&mut rng);
        }
    }

    let data = img.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect();
    NormalizedImage::new(res, res, data, params.source_id())
}

/// Calls `f(row, col, dx, dy)` for pixels whose centre lies within the
/// axis-aligned box of half-width `reach` around `(cx, cy)`.
fn for_each_in_box(res: usize, cx: f64, cy: f64, reach: f64, mut f: impl FnMut(usize, usize, f64, f64)) {
    let lo = |c: f64| libm::floor(c - reach - 0.5).max(0.0) as usize;
    let hi = |c: f64| (libm::ceil(c + reach + 0.5).max(0.0) as usize).min(res);
    for i in lo(cy)..hi(cy) {
        let dy = i as f64 + 0.5 - cy;
        for j in lo(cx)..hi(cx) {
            let dx = j as f64 + 0.5 - cx;
            f(i, j, dx, dy);
        }
    }
}

/// `count` synthetic images with per-image seeds derived from `base.seed`.
pub fn synth_corpus(base: &SynthParams, count: usize) -> Result<Vec<NormalizedImage>, PrepError> {
    (0..count)
        .map(|k| {
            let params = SynthParams { seed: crate::rng::derive_seed_index(base.seed, k as u64), ..*base };
            synth_sun(&params)
        })
        .collect()
}

//! Independent reference implementations and fixtures shared by the
//! integration tests and the acceptance runner.
#![allow(dead_code)]

use heliokit_core::fits::{Bitpix, Card, CardValue, FitsImage};
use heliokit_core::FeatureSet;
use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Marsaglia polar method; deliberately not the library's Box-Muller.
    loop {
        let u: f64 = rng.random_range(-1.0..1.0);
        let v: f64 = rng.random_range(-1.0..1.0);
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

pub fn random_features(rng: &mut ChaCha8Rng, n: usize, d: usize, shift: f32) -> FeatureSet {
    let rows: Vec<Vec<f32>> = (0..n).map(|_| (0..d).map(|_| normal(rng) as f32 + shift).collect()).collect();
    FeatureSet::from_rows("test", &rows).unwrap()
}

// ---------------------------------------------------------------------------
// KID

fn kernel(u: &[f32], v: &[f32]) -> f64 {
    let d = u.len() as f64;
    let mut dot = 0.0;
    for i in 0..u.len() {
        dot += u[i] as f64 * v[i] as f64;
    }
    (dot / d + 1.0).powi(3)
}

/// Unbiased MMD² straight from the definition.
pub fn mmd2_reference(x: &FeatureSet, y: &FeatureSet) -> f64 {
    let (m, n) = (x.count(), y.count());
    let mut kxx = 0.0;
    for i in 0..m {
        for j in 0..m {
            if i != j {
                kxx += kernel(x.row(i), x.row(j));
            }
        }
    }
    let mut kyy = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                kyy += kernel(y.row(i), y.row(j));
            }
        }
    }
    let mut kxy = 0.0;
    for i in 0..m {
        for j in 0..n {
            kxy += kernel(x.row(i), y.row(j));
        }
    }
    kxx / (m * (m - 1)) as f64 + kyy / (n * (n - 1)) as f64 - 2.0 * kxy / (m * n) as f64
}

// ---------------------------------------------------------------------------
// Precision / recall

fn dist2(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum()
}

/// Full distance matrix, sorted rows, membership by scanning every pair.
pub fn precision_recall_reference(real: &FeatureSet, fake: &FeatureSet, k: usize) -> (f64, f64) {
    let radii = |s: &FeatureSet| -> Vec<f64> {
        (0..s.count())
            .map(|i| {
                let mut d: Vec<f64> = (0..s.count()).filter(|&j| j != i).map(|j| dist2(s.row(i), s.row(j))).collect();
                d.sort_by(f64::total_cmp);
                d[k - 1]
            })
            .collect()
    };
    let coverage = |support: &FeatureSet, r: &[f64], query: &FeatureSet| -> f64 {
        let mut hits = 0;
        for q in 0..query.count() {
            let mut inside = false;
            for s in 0..support.count() {
                if dist2(query.row(q), support.row(s)) <= r[s] {
                    inside = true;
                }
            }
            hits += inside as usize;
        }
        hits as f64 / query.count() as f64
    };
    let (rr, rf) = (radii(real), radii(fake));
    (coverage(real, &rr, fake), coverage(fake, &rf, real))
}

// ---------------------------------------------------------------------------
// Binomial test by exact integer enumeration

fn binomial_row(n: u64) -> Vec<BigUint> {
    let mut row = vec![BigUint::from(1u32)];
    for i in 0..n {
        let next = &row[i as usize] * BigUint::from(n - i) / BigUint::from(i + 1);
        row.push(next);
    }
    row
}

/// Two-sided p-value under `p0 = a / b` computed with integer weights
/// `C(n, i) a^i (b - a)^(n - i)`. An outcome counts when its weight is at
/// most `(1 + 1e-7)` times the observed one, evaluated in integers.
pub fn binomial_p_exact(k: u64, n: u64, a: u64, b: u64) -> f64 {
    let c = binomial_row(n);
    let weights: Vec<BigUint> = (0..=n)
        .map(|i| &c[i as usize] * BigUint::from(a).pow(i as u32) * BigUint::from(b - a).pow((n - i) as u32))
        .collect();
    let target = &weights[k as usize];
    let mut tail = BigUint::zero();
    for w in &weights {
        if w * BigUint::from(10_000_000u32) <= target * BigUint::from(10_000_001u32) {
            tail += w;
        }
    }
    let total = BigUint::from(b).pow(n as u32);
    ratio(&tail, &total)
}

/// `num / den` as f64 without overflowing either operand.
fn ratio(num: &BigUint, den: &BigUint) -> f64 {
    let shift = den.bits().saturating_sub(60);
    let scaled_num = (num << 60u32) >> shift;
    let scaled_den = den >> shift;
    scaled_num.to_f64().unwrap() / scaled_den.to_f64().unwrap() / 2f64.powi(60)
}

// ---------------------------------------------------------------------------
// Dense eigensolver reference

/// Eigenvalues (descending) and unit eigenvectors of the sample covariance.
pub fn pca_reference(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = rows.len();
    let w = rows[0].len();
    let data = nalgebra::DMatrix::from_fn(n, w, |i, j| rows[i][j]);
    let mean = data.row_mean();
    let centered = nalgebra::DMatrix::from_fn(n, w, |i, j| data[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..w).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = order.iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect();
    (values, vectors)
}

// ---------------------------------------------------------------------------
// FITS generation

fn random_keyword(rng: &mut ChaCha8Rng) -> String {
    const ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-";
    loop {
        let len = rng.random_range(1..=8);
        let kw: String = (0..len).map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())] as char).collect();
        let reserved = ["SIMPLE", "BITPIX", "NAXIS", "BZERO", "BSCALE", "END", "COMMENT", "HISTORY"];
        if !reserved.contains(&kw.as_str()) && !kw.starts_with("NAXIS") {
            return kw;
        }
    }
}

/// Printable text with no leading or trailing spaces.
fn random_text(rng: &mut ChaCha8Rng, max_len: usize) -> String {
    let len = rng.random_range(1..=max_len.max(1));
    let mut s: String = (0..len).map(|_| rng.random_range(0x20u8..=0x7e) as char).collect();
    s = s.trim().to_string();
    if s.is_empty() {
        s.push('x');
    }
    s
}

fn random_card(rng: &mut ChaCha8Rng) -> Card {
    match rng.random_range(0..7) {
        0 => Card::commentary(["COMMENT", "HISTORY", ""][rng.random_range(0..3)], &random_text(rng, 72)),
        kind => {
            let value = match kind {
                1 => CardValue::Logical(rng.random()),
                2 => CardValue::Int(if rng.random() { rng.random() } else { rng.random_range(-1000..1000) }),
                3 => {
                    let bits: u64 = rng.random();
                    let f = f64::from_bits(bits);
                    CardValue::Float(if f.is_finite() { f } else { rng.random_range(-1e6..1e6) })
                }
                4 => CardValue::Str(random_text(rng, 30)),
                5 => CardValue::Float(rng.random_range(-100.0..100.0)),
                _ => CardValue::Undefined,
            };
            let mut card = Card::new(&random_keyword(rng), value, None);
            if rng.random_bool(0.5) {
                let used = card_len(&card);
                if used + 4 < 80 {
                    card.comment = Some(random_text(rng, 80 - used - 3));
                }
            }
            card
        }
    }
}

/// Length of the value part as the writer lays it out.
fn card_len(card: &Card) -> usize {
    match &card.value {
        Some(CardValue::Str(s)) => 10 + (s.replace('\'', "''").len().max(8) + 2),
        Some(CardValue::Float(f)) => 10 + format!("{f:?}").len().max(20),
        _ => 30,
    }
}

/// A random image the writer must accept and reproduce exactly.
pub fn random_fits(rng: &mut ChaCha8Rng) -> FitsImage {
    let bitpix = [Bitpix::U8, Bitpix::I16, Bitpix::I32, Bitpix::I64, Bitpix::F32, Bitpix::F64][rng.random_range(0..6)];
    let naxes: Vec<usize> = match rng.random_range(0..10) {
        0 => vec![],
        1 => vec![rng.random_range(1..50)],
        2 => vec![rng.random_range(1..6), rng.random_range(1..6), rng.random_range(1..4)],
        _ => vec![rng.random_range(1..40), rng.random_range(1..40)],
    };
    let count = if naxes.is_empty() { 0 } else { naxes.iter().product() };

    // (bzero, bscale) and a generator of raw stored values.
    let (bzero, bscale): (f64, f64) = match (bitpix, rng.random_range(0..4)) {
        (Bitpix::U8, 1) => (-128.0, 1.0),
        (Bitpix::I16, 1) => (32768.0, 1.0),
        (Bitpix::I32, 1) => (2147483648.0, 1.0),
        (Bitpix::F32 | Bitpix::F64, _) => (0.0, 1.0),
        (_, 2) => (rng.random_range(-500..500) as f64 + 0.5, [2.0, 3.0, 4.5][rng.random_range(0..3)]),
        _ => (0.0, 1.0),
    };
    let data = (0..count)
        .map(|_| {
            let raw: f64 = match bitpix {
                Bitpix::U8 => rng.random::<u8>() as f64,
                Bitpix::I16 => rng.random::<i16>() as f64,
                Bitpix::I32 => rng.random::<i32>() as f64,
                Bitpix::I64 => {
                    let v: i64 = if bscale == 1.0 { rng.random() } else { rng.random_range(-(1 << 40)..(1 << 40)) };
                    if bscale == 1.0 {
                        return v;
                    }
                    v as f64
                }
                Bitpix::F32 => rng.random_range(-(1i64 << 24)..=(1i64 << 24)) as f64,
                Bitpix::F64 => rng.random_range(-(1i64 << 53)..=(1i64 << 53)) as f64,
            };
            (bscale * raw + bzero).round_ties_even() as i64
        })
        .collect();
    let cards = (0..rng.random_range(0..40)).map(|_| random_card(rng)).collect();
    FitsImage { cards, bitpix, naxes, bzero, bscale, data }
}

// ---------------------------------------------------------------------------
// Published metric table (rows ordered by FID)

pub const TABLE_MODELS: [&str; 16] = [
    "ProjectedGAN (Baseline)",
    "EfficientNet-Lite3",
    "EfficientNet-Lite2",
    "Augmentations off",
    "Discriminator 1,2,3",
    "Trainable Projections",
    "EfficientNet-Lite1",
    "Discriminator 1,2",
    "No Cross Scale Mixing",
    "Discriminator 1",
    "No Cross Scale/Channel Mixing",
    "Diffusion (ADM)",
    "Random feature network",
    "Unfreeze feature network",
    "Randomly initialized feature network (unfrozen)",
    "Unfreeze feature network+Trainable Projections",
];

/// FID, rFID x1e3, KID x1e3, CLIP-FID x1e3, precision, recall.
pub const TABLE_METRICS: [[f64; 6]; 16] = [
    [2.37, 10.79, 0.74, 12.10, 0.60, 0.84],
    [3.80, 13.08, 1.61, 20.42, 0.54, 0.71],
    [4.07, 13.17, 0.99, 13.43, 0.58, 0.75],
    [4.19, 17.34, 1.62, 10.81, 0.66, 0.51],
    [6.45, 19.25, 2.50, 20.48, 0.65, 0.29],
    [7.22, 15.12, 3.88, 31.89, 0.48, 0.57],
    [7.42, 18.14, 4.31, 24.91, 0.63, 0.47],
    [7.43, 24.99, 3.15, 26.35, 0.54, 0.33],
    [9.60, 28.75, 2.89, 22.91, 0.60, 0.15],
    [10.69, 22.40, 6.15, 37.54, 0.47, 0.39],
    [10.99, 32.29, 4.74, 27.56, 0.62, 0.16],
    [15.27, 140.63, 15.59, 111.25, 0.43, 0.63],
    [17.72, 9.01, 16.44, 267.15, 0.15, 0.57],
    [171.56, 3366.57, 199.23, 2440.33, 0.01, 0.00],
    [252.43, 5119.63, 299.56, 3111.04, 0.00, 0.00],
    [328.04, 7221.13, 405.74, 4784.95, 0.00, 0.00],
];

pub fn table_column(i: usize) -> Vec<f64> {
    TABLE_METRICS.iter().map(|r| r[i]).collect()
}

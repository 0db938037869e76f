//! Primary-HDU FITS reading and writing.
//!
//! Covers the subset needed for Level-1 EUV images: 2880-byte blocks, 80-byte
//! header cards terminated by `END`, big-endian pixel data and BZERO/BSCALE
//! scaling. Pixel values are returned as physical integer DN counts. Any
//! extension HDUs after the primary data unit are ignored.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

pub const BLOCK_LEN: usize = 2880;
pub const CARD_LEN: usize = 80;

/// Default metadata keyword carrying the image quality bitmask.
pub const QUALITY_KEYWORD: &str = "QUALITY";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitsError {
    #[error("truncated file: {0}")]
    TruncatedFile(String),
    #[error("malformed card {index}: {reason}")]
    MalformedCard { index: usize, reason: String },
    #[error("unsupported BITPIX {0}")]
    UnsupportedBitpix(i64),
    #[error("missing mandatory keyword {0}")]
    MissingKeyword(&'static str),
    #[error("non-finite pixel value in floating-point data")]
    NonFiniteData,
    #[error("scaled pixel value does not fit a 64-bit integer")]
    ScaledOverflow,
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

fn malformed(index: usize, reason: impl Into<String>) -> FitsError {
    FitsError::MalformedCard { index, reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bitpix {
    U8,
    I16,
    I32,
    I64,
    F32,
    F64,
}

impl Bitpix {
    pub fn from_code(code: i64) -> Result<Self, FitsError> {
        Ok(match code {
            8 => Bitpix::U8,
            16 => Bitpix::I16,
            32 => Bitpix::I32,
            64 => Bitpix::I64,
            -32 => Bitpix::F32,
            -64 => Bitpix::F64,
            other => return Err(FitsError::UnsupportedBitpix(other)),
        })
    }

    pub fn code(self) -> i64 {
        match self {
            Bitpix::U8 => 8,
            Bitpix::I16 => 16,
            Bitpix::I32 => 32,
            Bitpix::I64 => 64,
            Bitpix::F32 => -32,
            Bitpix::F64 => -64,
        }
    }

    pub fn bytes_per_pixel(self) -> usize {
        (self.code().unsigned_abs() / 8) as usize
    }

    pub fn is_float(self) -> bool {
        matches!(self, Bitpix::F32 | Bitpix::F64)
    }

    fn int_range(self) -> (i128, i128) {
        match self {
            Bitpix::U8 => (0, u8::MAX as i128),
            Bitpix::I16 => (i16::MIN as i128, i16::MAX as i128),
            Bitpix::I32 => (i32::MIN as i128, i32::MAX as i128),
            Bitpix::I64 => (i64::MIN as i128, i64::MAX as i128),
            Bitpix::F32 | Bitpix::F64 => (i128::MIN, i128::MAX),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CardValue {
    Logical(bool),
    Int(i64),
    Float(f64),
    Str(String),
    /// `KEY =` with an empty value field.
    Undefined,
}

impl CardValue {
    pub fn as_i64(&self) -> Option<i64> {
        match *self {
            CardValue::Int(v) => Some(v),
            CardValue::Float(f) if f.is_finite() && libm::trunc(f) == f && f.abs() < 9.2e18 => Some(f as i64),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            CardValue::Int(v) => Some(v as f64),
            CardValue::Float(f) => Some(f),
            _ => None,
        }
    }
}

/// One 80-byte header record.
///
/// Cards without a value (COMMENT, HISTORY, blank keyword, or any card
/// lacking the `= ` indicator) carry their text in `comment`.
#[derive(Debug, Clone, PartialEq)]
pub struct Card {
    pub keyword: String,
    pub value: Option<CardValue>,
    pub comment: Option<String>,
}

impl Card {
    pub fn new(keyword: &str, value: CardValue, comment: Option<&str>) -> Self {
        Card {
            keyword: keyword.to_string(),
            value: Some(value),
            comment: comment.map(|c| c.trim_end().to_string()).filter(|c| !c.is_empty()),
        }
    }

    pub fn commentary(keyword: &str, text: &str) -> Self {
        let text = text.trim_end();
        Card {
            keyword: keyword.to_string(),
            value: None,
            comment: (!text.is_empty()).then(|| text.to_string()),
        }
    }
}

const STRUCTURAL: [&str; 6] = ["SIMPLE", "BITPIX", "NAXIS", "BZERO", "BSCALE", "END"];

fn is_structural(keyword: &str) -> bool {
    if STRUCTURAL.contains(&keyword) {
        return true;
    }
    keyword
        .strip_prefix("NAXIS")
        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}

/// A parsed primary HDU.
///
/// `cards` holds every header card except the structural ones (SIMPLE,
/// BITPIX, NAXIS, NAXISn, BZERO, BSCALE, END), which are represented by the
/// typed fields. `data` holds physical values `bscale * raw + bzero`, row-major
/// with NAXIS1 as the fastest-varying axis.
#[derive(Debug, Clone, PartialEq)]
pub struct FitsImage {
    pub cards: Vec<Card>,
    pub bitpix: Bitpix,
    pub naxes: Vec<usize>,
    pub bzero: f64,
    pub bscale: f64,
    pub data: Vec<i64>,
}

impl FitsImage {
    /// A 2-D image with no extra cards and unit scaling.
    pub fn new_2d(width: usize, height: usize, bitpix: Bitpix, data: Vec<i64>) -> Self {
        FitsImage { cards: Vec::new(), bitpix, naxes: alloc::vec![width, height], bzero: 0.0, bscale: 1.0, data }
    }

    pub fn card(&self, keyword: &str) -> Option<&Card> {
        self.cards.iter().find(|c| c.keyword == keyword)
    }

    pub fn value(&self, keyword: &str) -> Option<&CardValue> {
        self.card(keyword).and_then(|c| c.value.as_ref())
    }

    /// Replaces the value of `keyword`, appending a new card if absent.
    pub fn set_card(&mut self, keyword: &str, value: CardValue, comment: Option<&str>) {
        match self.cards.iter_mut().find(|c| c.keyword == keyword) {
            Some(card) => *card = Card::new(keyword, value, comment),
            None => self.cards.push(Card::new(keyword, value, comment)),
        }
    }

    pub fn pixel_count(&self) -> usize {
        if self.naxes.is_empty() {
            0
        } else {
            self.naxes.iter().product()
        }
    }

    /// NAXIS1, or 0 for a header-only HDU.
    pub fn width(&self) -> usize {
        self.naxes.first().copied().unwrap_or(0)
    }

    /// NAXIS2; 1 for a 1-D image, 0 for a header-only HDU.
    pub fn height(&self) -> usize {
        match self.naxes.len() {
            0 => 0,
            1 => 1,
            _ => self.naxes[1],
        }
    }

    pub fn validate(&self) -> Result<(), FitsError> {
        let inv = |m: &str| Err(FitsError::InvariantViolation(m.to_string()));
        if self.naxes.len() > 999 {
            return inv("more than 999 axes");
        }
        let count = self
            .naxes
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| FitsError::InvariantViolation("axis product overflows".to_string()))?;
        let count = if self.naxes.is_empty() { 0 } else { count };
        if self.data.len() != count {
            return Err(FitsError::InvariantViolation(format!(
                "data has {} values, axes require {count}",
                self.data.len()
            )));
        }
        if !self.bzero.is_finite() || !self.bscale.is_finite() || self.bscale == 0.0 {
            return inv("BZERO/BSCALE must be finite with non-zero BSCALE");
        }
        for card in &self.cards {
            validate_keyword(&card.keyword)?;
            if self.reserves(&card.keyword) {
                return Err(FitsError::InvariantViolation(format!(
                    "structural keyword {} belongs in the typed fields",
                    card.keyword
                )));
            }
        }
        Ok(())
    }
}

impl FitsImage {
    /// Whether `keyword` is carried by a typed field for this image.
    fn reserves(&self, keyword: &str) -> bool {
        if STRUCTURAL.contains(&keyword) {
            return true;
        }
        is_structural(keyword) && keyword[5..].parse::<usize>().is_ok_and(|n| n >= 1 && n <= self.naxes.len())
    }
}

fn validate_keyword(keyword: &str) -> Result<(), FitsError> {
    let ok = keyword.len() <= 8
        && keyword.bytes().all(|b| b.is_ascii_uppercase() || b.is_ascii_digit() || b == b'-' || b == b'_');
    if ok {
        Ok(())
    } else {
        Err(FitsError::InvariantViolation(format!("invalid keyword {keyword:?}")))
    }
}

/// Verdict of the `QUALITY == 0` validity filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QualityVerdict {
    /// `None` when the keyword is absent or not an integer.
    pub quality_flag: Option<i64>,
    pub accepted: bool,
}

/// Accepts an image iff its `QUALITY` card exists and equals 0.
pub fn quality_filter(img: &FitsImage) -> QualityVerdict {
    quality_filter_with_key(img, QUALITY_KEYWORD)
}

pub fn quality_filter_with_key(img: &FitsImage, keyword: &str) -> QualityVerdict {
    let quality_flag = img.value(keyword).and_then(CardValue::as_i64);
    QualityVerdict { quality_flag, accepted: quality_flag == Some(0) }
}

// ---------------------------------------------------------------------------
// Parsing

/// Parses the primary HDU of a FITS file.
pub fn parse_fits(bytes: &[u8]) -> Result<FitsImage, FitsError> {
    if bytes.is_empty() || !bytes.len().is_multiple_of(BLOCK_LEN) {
        return Err(FitsError::TruncatedFile(format!(
            "length {} is not a positive multiple of {BLOCK_LEN}",
            bytes.len()
        )));
    }

    let mut raw_cards = Vec::new();
    let mut header_end = None;
    for (index, chunk) in bytes.chunks_exact(CARD_LEN).enumerate() {
        if &chunk[..8] == b"END     " {
            header_end = Some(index);
            break;
        }
        raw_cards.push(parse_card(index, chunk)?);
    }
    let end_index = header_end.ok_or_else(|| FitsError::TruncatedFile("no END card".to_string()))?;
    let header_len = ((end_index + 1) * CARD_LEN).div_ceil(BLOCK_LEN) * BLOCK_LEN;

    let mut iter = raw_cards.into_iter().enumerate();
    match iter.next() {
        Some((_, Card { ref keyword, value: Some(CardValue::Logical(true)), .. })) if keyword == "SIMPLE" => {}
        Some((i, Card { ref keyword, .. })) if keyword == "SIMPLE" => {
            return Err(malformed(i, "SIMPLE must be T"));
        }
        _ => return Err(FitsError::MissingKeyword("SIMPLE")),
    }

    let mut bitpix = None;
    let mut naxis: Option<usize> = None;
    let mut naxes_found: Vec<(usize, usize)> = Vec::new();
    let mut bzero = 0.0;
    let mut bscale = 1.0;
    let mut cards = Vec::new();

    for (i, card) in iter {
        let int_value = |card: &Card| -> Result<i64, FitsError> {
            card.value.as_ref().and_then(CardValue::as_i64).ok_or_else(|| malformed(i, "expected an integer value"))
        };
        let real_value = |card: &Card| -> Result<f64, FitsError> {
            card.value
                .as_ref()
                .and_then(CardValue::as_f64)
                .filter(|v| v.is_finite())
                .ok_or_else(|| malformed(i, "expected a real value"))
        };
        match card.keyword.as_str() {
            "BITPIX" => bitpix = Some(Bitpix::from_code(int_value(&card)?)?),
            "NAXIS" => {
                let n = int_value(&card)?;
                if !(0..=999).contains(&n) {
                    return Err(malformed(i, "NAXIS out of range"));
                }
                naxis = Some(n as usize);
            }
            "BZERO" => bzero = real_value(&card)?,
            "BSCALE" => {
                bscale = real_value(&card)?;
                if bscale == 0.0 {
                    return Err(malformed(i, "BSCALE must be non-zero"));
                }
            }
            kw if is_structural(kw) && kw.starts_with("NAXIS") => {
                let axis: usize = kw[5..].parse().map_err(|_| malformed(i, "bad NAXISn keyword"))?;
                let len = int_value(&card)?;
                if len < 0 {
                    return Err(malformed(i, "negative axis length"));
                }
                naxes_found.push((axis, len as usize));
            }
            "SIMPLE" => return Err(malformed(i, "duplicate SIMPLE")),
            _ => cards.push(card),
        }
    }

    let bitpix = bitpix.ok_or(FitsError::MissingKeyword("BITPIX"))?;
    let naxis = naxis.ok_or(FitsError::MissingKeyword("NAXIS"))?;
    let mut naxes = alloc::vec![None; naxis];
    for (axis, len) in naxes_found {
        if axis == 0 || axis > naxis {
            // NAXISn beyond NAXIS is not structural for this HDU.
            cards.push(Card::new(&format!("NAXIS{axis}"), CardValue::Int(len as i64), None));
        } else {
            naxes[axis - 1] = Some(len);
        }
    }
    let naxes: Vec<usize> = naxes.into_iter().collect::<Option<_>>().ok_or(FitsError::MissingKeyword("NAXISn"))?;

    let count = if naxes.is_empty() {
        0
    } else {
        naxes
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| FitsError::TruncatedFile("axis product overflows".to_string()))?
    };
    let data_len = count
        .checked_mul(bitpix.bytes_per_pixel())
        .ok_or_else(|| FitsError::TruncatedFile("data size overflows".to_string()))?;
    let available = bytes.len() - header_len.min(bytes.len());
    if data_len > available {
        return Err(FitsError::TruncatedFile(format!("data needs {data_len} bytes, {available} present")));
    }
    let payload = &bytes[header_len..header_len + data_len];
    let padded = data_len.div_ceil(BLOCK_LEN) * BLOCK_LEN;
    if available > padded {
        log::warn!("ignoring {} bytes of extension HDUs after the primary data unit", available - padded);
    }

    let data = decode_pixels(payload, bitpix, bzero, bscale)?;
    Ok(FitsImage { cards, bitpix, naxes, bzero, bscale, data })
}

fn parse_card(index: usize, chunk: &[u8]) -> Result<Card, FitsError> {
    if let Some(pos) = chunk.iter().position(|&b| !(0x20..=0x7e).contains(&b)) {
        return Err(malformed(index, format!("non-printable byte at column {}", pos + 1)));
    }
    // Printable ASCII is valid UTF-8.
    let text = core::str::from_utf8(chunk).map_err(|_| malformed(index, "not ASCII"))?;
    let keyword = text[..8].trim_end();
    if keyword.bytes().any(|b| b == b' ') {
        return Err(malformed(index, "embedded space in keyword"));
    }
    let commentary = matches!(keyword, "" | "COMMENT" | "HISTORY");
    if commentary || &text[8..10] != "= " {
        return Ok(Card::commentary(keyword, &text[8..]));
    }
    let (value, comment) = parse_value_field(index, &text[10..])?;
    Ok(Card { keyword: keyword.to_string(), value: Some(value), comment })
}

fn parse_value_field(index: usize, field: &str) -> Result<(CardValue, Option<String>), FitsError> {
    let trimmed = field.trim_start();
    let (value, rest) = if let Some(body) = trimmed.strip_prefix('\'') {
        let mut s = String::new();
        let mut chars = body.char_indices().peekable();
        let mut close = None;
        while let Some((i, c)) = chars.next() {
            if c == '\'' {
                if let Some(&(_, '\'')) = chars.peek() {
                    chars.next();
                    s.push('\'');
                } else {
                    close = Some(i);
                    break;
                }
            } else {
                s.push(c);
            }
        }
        let close = close.ok_or_else(|| malformed(index, "unterminated string"))?;
        let trimmed_len = s.trim_end().len();
        s.truncate(trimmed_len);
        (CardValue::Str(s), &body[close + 1..])
    } else {
        let split = trimmed.find('/').unwrap_or(trimmed.len());
        let token = trimmed[..split].trim();
        (parse_scalar(index, token)?, &trimmed[split..])
    };

    let rest = rest.trim_start();
    let comment = if rest.is_empty() {
        None
    } else if let Some(c) = rest.strip_prefix('/') {
        let c = c.strip_prefix(' ').unwrap_or(c).trim_end();
        (!c.is_empty()).then(|| c.to_string())
    } else {
        return Err(malformed(index, "trailing text after value"));
    };
    Ok((value, comment))
}

fn parse_scalar(index: usize, token: &str) -> Result<CardValue, FitsError> {
    match token {
        "" => return Ok(CardValue::Undefined),
        "T" => return Ok(CardValue::Logical(true)),
        "F" => return Ok(CardValue::Logical(false)),
        _ => {}
    }
    let numeric_chars = token
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'+' | b'-' | b'.' | b'E' | b'D' | b'e' | b'd'));
    if !numeric_chars || !token.bytes().any(|b| b.is_ascii_digit()) {
        return Err(malformed(index, format!("unrecognised value {token:?}")));
    }
    let is_int = token.bytes().all(|b| b.is_ascii_digit() || b == b'+' || b == b'-');
    if is_int {
        if let Ok(v) = token.parse::<i64>() {
            return Ok(CardValue::Int(v));
        }
    }
    let normalized = token.replace(['D', 'd'], "E");
    normalized
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(CardValue::Float)
        .ok_or_else(|| malformed(index, format!("bad numeric value {token:?}")))
}

fn decode_pixels(payload: &[u8], bitpix: Bitpix, bzero: f64, bscale: f64) -> Result<Vec<i64>, FitsError> {
    let width = bitpix.bytes_per_pixel();
    let integer_offset = (bscale == 1.0 && libm::trunc(bzero) == bzero && bzero.abs() < 1.7e38).then_some(bzero as i128);
    let mut out = Vec::with_capacity(payload.len() / width);
    for px in payload.chunks_exact(width) {
        let value = match bitpix {
            Bitpix::U8 => RawPixel::Int(px[0] as i128),
            Bitpix::I16 => RawPixel::Int(i16::from_be_bytes([px[0], px[1]]) as i128),
            Bitpix::I32 => RawPixel::Int(i32::from_be_bytes([px[0], px[1], px[2], px[3]]) as i128),
            Bitpix::I64 => RawPixel::Int(i64::from_be_bytes(px.try_into().expect("8-byte chunk")) as i128),
            Bitpix::F32 => RawPixel::Float(f32::from_be_bytes([px[0], px[1], px[2], px[3]]) as f64),
            Bitpix::F64 => RawPixel::Float(f64::from_be_bytes(px.try_into().expect("8-byte chunk"))),
        };
        out.push(scale_pixel(value, bzero, bscale, integer_offset)?);
    }
    Ok(out)
}

#[derive(Clone, Copy)]
enum RawPixel {
    Int(i128),
    Float(f64),
}

fn scale_pixel(raw: RawPixel, bzero: f64, bscale: f64, integer_offset: Option<i128>) -> Result<i64, FitsError> {
    match (raw, integer_offset) {
        (RawPixel::Int(r), Some(offset)) => i64::try_from(r + offset).map_err(|_| FitsError::ScaledOverflow),
        (raw, _) => {
            let r = match raw {
                RawPixel::Int(r) => r as f64,
                RawPixel::Float(f) => {
                    if !f.is_finite() {
                        return Err(FitsError::NonFiniteData);
                    }
                    f
                }
            };
            let physical = libm::rint(bscale * r + bzero);
            if !physical.is_finite() || physical.abs() >= 9.223_372_036_854_775e18 {
                return Err(FitsError::ScaledOverflow);
            }
            Ok(physical as i64)
        }
    }
}

// ---------------------------------------------------------------------------
// Writing

/// Serializes an image as a single-HDU FITS file.
///
/// Fails with [`FitsError::InvariantViolation`] when a physical value cannot
/// be represented exactly under the image's BITPIX/BZERO/BSCALE, or a card
/// does not fit in 80 bytes.
pub fn write_fits(img: &FitsImage) -> Result<Vec<u8>, FitsError> {
    img.validate()?;
    let mut header: Vec<[u8; CARD_LEN]> = Vec::new();
    header.push(format_card(&Card::new("SIMPLE", CardValue::Logical(true), None))?);
    header.push(format_card(&Card::new("BITPIX", CardValue::Int(img.bitpix.code()), None))?);
    header.push(format_card(&Card::new("NAXIS", CardValue::Int(img.naxes.len() as i64), None))?);
    for (i, &n) in img.naxes.iter().enumerate() {
        header.push(format_card(&Card::new(&format!("NAXIS{}", i + 1), CardValue::Int(n as i64), None))?);
    }
    if img.bzero != 0.0 || img.bscale != 1.0 {
        header.push(format_card(&Card::new("BZERO", number_value(img.bzero), None))?);
        header.push(format_card(&Card::new("BSCALE", number_value(img.bscale), None))?);
    }
    for card in &img.cards {
        header.push(format_card(card)?);
    }
    let mut end = [b' '; CARD_LEN];
    end[..3].copy_from_slice(b"END");
    header.push(end);

    let mut out = Vec::with_capacity((header.len() * CARD_LEN).div_ceil(BLOCK_LEN) * BLOCK_LEN);
    for card in &header {
        out.extend_from_slice(card);
    }
    out.resize(out.len().div_ceil(BLOCK_LEN) * BLOCK_LEN, b' ');

    let data_start = out.len();
    encode_pixels(img, &mut out)?;
    let padded = data_start + (out.len() - data_start).div_ceil(BLOCK_LEN) * BLOCK_LEN;
    out.resize(padded, 0);
    Ok(out)
}

fn number_value(v: f64) -> CardValue {
    if libm::trunc(v) == v && v.abs() < 9.0e15 {
        CardValue::Int(v as i64)
    } else {
        CardValue::Float(v)
    }
}

fn format_float(v: f64) -> String {
    // Debug formatting is the shortest exact round-trip and always carries a
    // decimal point or exponent.
    format!("{v:?}").to_uppercase()
}

fn format_card(card: &Card) -> Result<[u8; CARD_LEN], FitsError> {
    validate_keyword(&card.keyword)?;
    let mut text = format!("{:<8}", card.keyword);
    match &card.value {
        None => {
            if let Some(c) = &card.comment {
                text.push_str(c);
            }
        }
        Some(value) => {
            text.push_str("= ");
            let field = match value {
                CardValue::Logical(b) => format!("{:>20}", if *b { "T" } else { "F" }),
                CardValue::Int(v) => format!("{v:>20}"),
                CardValue::Float(v) => {
                    if !v.is_finite() {
                        return Err(FitsError::InvariantViolation(format!("{}: non-finite value", card.keyword)));
                    }
                    format!("{:>20}", format_float(*v))
                }
                CardValue::Str(s) => {
                    if s.ends_with(' ') {
                        return Err(FitsError::InvariantViolation(format!(
                            "{}: trailing spaces in a string value are not preserved",
                            card.keyword
                        )));
                    }
                    format!("'{:<8}'", s.replace('\'', "''"))
                }
                CardValue::Undefined => format!("{:20}", ""),
            };
            text.push_str(&field);
            if let Some(c) = &card.comment {
                text.push_str(" / ");
                text.push_str(c);
            }
        }
    }
    if text.len() > CARD_LEN {
        return Err(FitsError::InvariantViolation(format!("card {} exceeds 80 bytes", card.keyword)));
    }
    if !text.bytes().all(|b| (0x20..=0x7e).contains(&b)) {
        return Err(FitsError::InvariantViolation(format!("card {} is not printable ASCII", card.keyword)));
    }
    let mut out = [b' '; CARD_LEN];
    out[..text.len()].copy_from_slice(text.as_bytes());
    Ok(out)
}

fn encode_pixels(img: &FitsImage, out: &mut Vec<u8>) -> Result<(), FitsError> {
    let integer_offset =
        (img.bscale == 1.0 && libm::trunc(img.bzero) == img.bzero && img.bzero.abs() < 1.7e38).then_some(img.bzero as i128);
    let (lo, hi) = img.bitpix.int_range();
    let unrepresentable = |v: i64| FitsError::InvariantViolation(format!("value {v} not representable under {:?}", img.bitpix));

    for &phys in &img.data {
        if img.bitpix.is_float() {
            let raw = if integer_offset == Some(0) { phys as f64 } else { (phys as f64 - img.bzero) / img.bscale };
            let decoded = match img.bitpix {
                Bitpix::F32 => {
                    let r = raw as f32;
                    out.extend_from_slice(&r.to_be_bytes());
                    RawPixel::Float(r as f64)
                }
                _ => {
                    out.extend_from_slice(&raw.to_be_bytes());
                    RawPixel::Float(raw)
                }
            };
            if scale_pixel(decoded, img.bzero, img.bscale, None).ok() != Some(phys) {
                return Err(unrepresentable(phys));
            }
            continue;
        }
        let raw: i128 = match integer_offset {
            Some(offset) => phys as i128 - offset,
            None => {
                let r = libm::rint((phys as f64 - img.bzero) / img.bscale);
                if !r.is_finite() || r.abs() > 1.0e19 {
                    return Err(unrepresentable(phys));
                }
                let r = r as i128;
                if scale_pixel(RawPixel::Int(r), img.bzero, img.bscale, None).ok() != Some(phys) {
                    return Err(unrepresentable(phys));
                }
                r
            }
        };
        if raw < lo || raw > hi {
            return Err(unrepresentable(phys));
        }
        match img.bitpix {
            Bitpix::U8 => out.push(raw as u8),
            Bitpix::I16 => out.extend_from_slice(&(raw as i16).to_be_bytes()),
            Bitpix::I32 => out.extend_from_slice(&(raw as i32).to_be_bytes()),
            Bitpix::I64 => out.extend_from_slice(&(raw as i64).to_be_bytes()),
            Bitpix::F32 | Bitpix::F64 => unreachable!(),
        }
    }
    Ok(())
}

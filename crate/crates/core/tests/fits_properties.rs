mod common;

use common::random_fits;
use heliokit_core::fits::{parse_fits, write_fits, Bitpix, FitsError, BLOCK_LEN};
use proptest::prelude::*;

fn card(text: &str) -> [u8; 80] {
    let mut c = [b' '; 80];
    c[..text.len()].copy_from_slice(text.as_bytes());
    c
}

fn assemble(cards: &[String], payload: &[u8]) -> Vec<u8> {
    let mut out: Vec<u8> = cards.iter().flat_map(|c| card(c)).collect();
    out.extend_from_slice(&card("END"));
    out.resize(out.len().div_ceil(BLOCK_LEN) * BLOCK_LEN, b' ');
    out.extend_from_slice(payload);
    out.resize(out.len().div_ceil(BLOCK_LEN) * BLOCK_LEN, 0);
    out
}

/// Stored values as raw integers or floats, with big-endian bytes.
fn encode_raw(bitpix: i64, raw: &[i64]) -> Vec<u8> {
    raw.iter()
        .flat_map(|&r| match bitpix {
            8 => vec![r as u8],
            16 => (r as i16).to_be_bytes().to_vec(),
            32 => (r as i32).to_be_bytes().to_vec(),
            64 => r.to_be_bytes().to_vec(),
            -32 => (r as f32).to_be_bytes().to_vec(),
            _ => (r as f64).to_be_bytes().to_vec(),
        })
        .collect()
}

/// Decodes one stored value the slow way: scale in extended precision and
/// round half to even.
fn reference_dn(raw: i64, bzero: f64, bscale: f64) -> i64 {
    if bscale == 1.0 && bzero.fract() == 0.0 {
        return (raw as i128 + bzero as i128) as i64;
    }
    (bscale * raw as f64 + bzero).round_ties_even() as i64
}

fn bitpix_strategy() -> impl Strategy<Value = i64> {
    prop_oneof![Just(8i64), Just(16), Just(32), Just(64), Just(-32), Just(-64)]
}

fn raw_for(bitpix: i64) -> BoxedStrategy<i64> {
    match bitpix {
        8 => (0i64..=255).boxed(),
        16 => (i16::MIN as i64..=i16::MAX as i64).boxed(),
        32 => (i32::MIN as i64..=i32::MAX as i64).boxed(),
        64 => (-(1i64 << 40)..(1i64 << 40)).boxed(),
        -32 => (-(1i64 << 24)..=(1i64 << 24)).boxed(),
        _ => (-(1i64 << 50)..(1i64 << 50)).boxed(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn write_then_parse_is_identity(seed in any::<u64>()) {
        let img = random_fits(&mut common::rng(seed));
        let bytes = write_fits(&img).unwrap();
        prop_assert_eq!(bytes.len() % BLOCK_LEN, 0);
        let back = parse_fits(&bytes).unwrap();
        prop_assert_eq!(&back, &img);
        prop_assert_eq!(write_fits(&back).unwrap(), bytes);
    }

    #[test]
    fn scaling_matches_reference_decoder(
        (bitpix, raw) in bitpix_strategy().prop_flat_map(|b| (Just(b), proptest::collection::vec(raw_for(b), 1..64))),
        scaling in prop_oneof![
            Just((0.0, 1.0)),
            (-40_000i64..40_000).prop_map(|z| (z as f64, 1.0)),
            (-1000.0f64..1000.0, 0.25f64..8.0),
        ],
    ) {
        let (bzero, bscale) = scaling;
        let cards = vec![
            "SIMPLE  =                    T".to_string(),
            format!("BITPIX  = {bitpix:>20}"),
            "NAXIS   =                    1".to_string(),
            format!("NAXIS1  = {:>20}", raw.len()),
            format!("BZERO   = {:>20}", format!("{bzero:?}").to_uppercase()),
            format!("BSCALE  = {:>20}", format!("{bscale:?}").to_uppercase()),
        ];
        let img = parse_fits(&assemble(&cards, &encode_raw(bitpix, &raw))).unwrap();
        prop_assert_eq!(img.bitpix, Bitpix::from_code(bitpix).unwrap());
        let want: Vec<i64> = raw.iter().map(|&r| reference_dn(r, bzero, bscale)).collect();
        prop_assert_eq!(img.data, want);
    }

    #[test]
    fn parser_never_panics_on_arbitrary_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..3 * BLOCK_LEN)) {
        let _ = parse_fits(&bytes);
    }

    #[test]
    fn parser_never_panics_on_random_printable_headers(
        lines in proptest::collection::vec("[ -~]{0,80}", 0..40),
        tail in proptest::collection::vec(any::<u8>(), 0..BLOCK_LEN),
    ) {
        let mut cards = vec!["SIMPLE  =                    T".to_string()];
        cards.extend(lines);
        let _ = parse_fits(&assemble(&cards, &tail));
    }
}

#[test]
fn unsigned_sixteen_bit_convention() {
    let cards = [
        "SIMPLE  =                    T",
        "BITPIX  =                   16",
        "NAXIS   =                    2",
        "NAXIS1  =                    2",
        "NAXIS2  =                    1",
        "BZERO   =                32768",
        "BSCALE  =                    1",
    ]
    .map(String::from);
    let img = parse_fits(&assemble(&cards, &encode_raw(16, &[-32768, 32767]))).unwrap();
    assert_eq!(img.data, vec![0, 65535]);
    assert_eq!(parse_fits(&write_fits(&img).unwrap()).unwrap(), img);
}

#[test]
fn truncated_data_is_reported() {
    let cards = [
        "SIMPLE  =                    T",
        "BITPIX  =                   64",
        "NAXIS   =                    1",
        "NAXIS1  =                  400",
    ]
    .map(String::from);
    let mut bytes = assemble(&cards, &[]);
    bytes.truncate(BLOCK_LEN);
    assert!(matches!(parse_fits(&bytes), Err(FitsError::TruncatedFile(_))));
}

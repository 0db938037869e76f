use heliokit_core::features::concat;
use heliokit_core::{FeatureError, FeatureSet};
use proptest::prelude::*;

fn set_strategy(dim: usize) -> impl Strategy<Value = Vec<Vec<f32>>> {
    proptest::collection::vec(proptest::collection::vec(-1e6f32..1e6, dim), 1..20)
}

proptest! {
    #[test]
    fn concat_counts_and_order(
        (a, b) in (1usize..8).prop_flat_map(|d| (set_strategy(d), set_strategy(d))),
    ) {
        let fa = FeatureSet::from_rows("e", &a).unwrap();
        let fb = FeatureSet::from_rows("e", &b).unwrap();
        let c = concat(&fa, &fb).unwrap();
        prop_assert_eq!(c.count(), a.len() + b.len());
        for (i, row) in a.iter().chain(&b).enumerate() {
            prop_assert_eq!(c.row(i), row.as_slice());
        }
    }

    #[test]
    fn any_non_finite_value_is_rejected(rows in set_strategy(3), pick in any::<prop::sample::Index>(), bad in prop_oneof![Just(f32::NAN), Just(f32::INFINITY), Just(f32::NEG_INFINITY)]) {
        let mut flat = rows.concat();
        let i = pick.index(flat.len());
        flat[i] = bad;
        let ids = (0..rows.len()).map(|r| format!("r{r}")).collect();
        prop_assert_eq!(FeatureSet::new("e", 3, flat, ids), Err(FeatureError::NonFiniteValue { row: i / 3 }));
    }

    #[test]
    fn select_picks_rows(rows in set_strategy(2), picks in proptest::collection::vec(any::<prop::sample::Index>(), 1..10)) {
        let fs = FeatureSet::from_rows("e", &rows).unwrap();
        let idx: Vec<usize> = picks.iter().map(|p| p.index(rows.len())).collect();
        let sel = fs.select(&idx).unwrap();
        for (k, &i) in idx.iter().enumerate() {
            prop_assert_eq!(sel.row(k), rows[i].as_slice());
        }
    }
}

use std::collections::HashSet;
use std::sync::OnceLock;

use hyplab_core::oracle::brute_force_count;
use hyplab_core::surface::*;
use proptest::prelude::*;

fn rep() -> &'static FuchsianRep {
    static REP: OnceLock<FuchsianRep> = OnceLock::new();
    REP.get_or_init(|| fuchsian_reference().unwrap())
}

fn catalog(radius: f64) -> ClassCatalog {
    ClassCatalog::enumerate(rep(), radius).unwrap()
}

fn word_from(indices: &[u8]) -> Word {
    let names: Vec<&str> = indices.iter().map(|&i| Letter::new(i).name()).collect();
    Word::parse(&names.join(" ")).unwrap()
}

#[test]
fn stored_lengths_are_translation_lengths() {
    for c in &catalog(8.0).classes {
        let l = translation_length(&rep().evaluate(&c.rep_word)).unwrap();
        assert!((l - c.length).abs() < 1e-10, "{}", c.rep_word);
    }
}

#[test]
fn inverse_classes_are_distinct_with_equal_length() {
    let cat = catalog(7.0);
    let keys: HashSet<[i64; 3]> = cat.classes.iter().map(|c| c.key()).collect();
    for c in &cat.classes {
        let inv = canonicalize(rep(), &c.rep_word.inverse()).unwrap();
        assert_ne!(inv.key(), c.key(), "{}", c.rep_word);
        assert!(keys.contains(&inv.key()));
        assert!((inv.length - c.length).abs() < 1e-10);
    }
}

#[test]
fn brute_force_oracle_agrees_at_larger_radius() {
    let b = brute_force_count(rep(), 6.0, 5_000_000).unwrap();
    assert_eq!(b.classes, catalog(6.0).len());
}

#[test]
fn catalog_is_sorted_and_primitive() {
    let cat = catalog(7.5);
    assert!(cat.classes.windows(2).all(|w| w[0].length <= w[1].length + 1e-12));
    assert!(cat.classes.iter().all(|c| c.primitive && c.length <= 7.5));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn enumeration_is_monotone(r1 in 3.0f64..6.5, extra in 0.0f64..1.5) {
        let small = catalog(r1);
        let big = catalog(r1 + extra);
        let keys: HashSet<[i64; 3]> = big.classes.iter().map(|c| c.key()).collect();
        prop_assert!(small.classes.iter().all(|c| keys.contains(&c.key())));
        prop_assert_eq!(big.count_up_to(r1), small.len());
    }

    #[test]
    fn canonicalization_is_conjugation_invariant(
        w in proptest::collection::vec(0u8..8, 1..10),
        g in proptest::collection::vec(0u8..8, 1..=4),
    ) {
        let w = word_from(&w).reduce();
        prop_assume!(!w.is_empty());
        let g = word_from(&g);
        let c1 = canonicalize(rep(), &w);
        prop_assume!(c1.is_ok());
        let c1 = c1.unwrap();
        let c2 = canonicalize(rep(), &g.concat(&w).concat(&g.inverse())).unwrap();
        prop_assert_eq!(c1.key(), c2.key());
        prop_assert!((c1.length - c2.length).abs() < 1e-9);
    }

    #[test]
    fn reduction_preserves_the_element(w in proptest::collection::vec(0u8..8, 0..16)) {
        let w = word_from(&w);
        let a = rep().evaluate(&w);
        let b = rep().evaluate(&w.reduce());
        let c = rep().evaluate(&w.dehn_shorten());
        let scale = a.max_abs_diff(&Mat2::new(0.0, 0.0, 0.0, 0.0));
        prop_assert!(a.psl_distance(&b) <= 1e-9 * scale);
        prop_assert!(a.psl_distance(&c) <= 1e-9 * scale);
        prop_assert!(w.dehn_shorten().len() <= w.reduce().len());
    }
}

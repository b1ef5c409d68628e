use hyplab_core::linalg::*;
use proptest::prelude::*;

fn entries(d: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d * d)
}

fn matrix(d: usize, e: &[(f64, f64)]) -> MatC {
    MatC::from_fn(d, |i, j| {
        let (re, im) = e[i * d + j];
        C64::new(re, im)
    })
}

/// `I + X / 2`: within distance 1/2 of the identity in each entry, so its
/// condition number stays moderate.
fn near_identity(d: usize, e: &[(f64, f64)]) -> MatC {
    MatC::from_fn(d, |i, j| {
        let (re, im) = e[i * d + j];
        let z = C64::new(0.5 * re, 0.5 * im);
        if i == j {
            z + 1.0
        } else {
            z / d as f64
        }
    })
}

/// `P diag(values) P^{-1}` with moduli `3^(d-1-i)` and the given arguments.
fn separated(d: usize, args: &[f64], e: &[(f64, f64)]) -> MatC {
    let values: Vec<C64> = (0..d).map(|i| C64::from_polar(3f64.powi((d - 1 - i) as i32), args[i])).collect();
    let p = near_identity(d, e);
    MatC::diag(&values).conjugate_by(&p).unwrap()
}

fn separation(values: &[C64]) -> f64 {
    let mut sep = f64::INFINITY;
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            sep = sep.min((values[i] - values[j]).norm());
        }
    }
    sep
}

#[test]
fn known_spectrum_is_recovered_with_eigenvectors() {
    let a = MatC::from_real(3, &[2.0, 1.0, 0.0, 0.0, 3.0, 1.0, 0.0, 0.0, -4.0]);
    let e = eigen_by_modulus(&a).unwrap();
    let want = [C64::new(-4.0, 0.0), C64::new(3.0, 0.0), C64::new(2.0, 0.0)];
    assert!(multiset_distance(&e.values, &want) < 1e-12);
    assert_eq!(e.values[0], C64::new(-4.0, 0.0));
    for i in 0..3 {
        let v = e.vector(i);
        let r = &a.0 * &v - v.clone() * e.values[i];
        assert!(r.norm() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eigenvalues_are_conjugation_invariant(d in 2usize..6, a in entries(5), p in entries(5)) {
        let a = matrix(d, &a[..d * d]);
        let p = near_identity(d, &p[..d * d]);
        let b = a.conjugate_by(&p).unwrap();
        let ea = eigen_by_modulus(&a).unwrap().values;
        let eb = eigen_by_modulus(&b).unwrap().values;
        // Clustered eigenvalues are ill-conditioned in any algorithm.
        prop_assume!(separation(&ea) > 1e-2);
        prop_assert!(multiset_distance(&ea, &eb) < 1e-7);
    }

    #[test]
    fn attracting_flag_is_power_invariant(d in 2usize..6, args in proptest::collection::vec(0.0f64..6.28, 5), p in entries(5), m in 2u32..4) {
        let a = separated(d, &args, &p[..d * d]);
        let ks: Vec<usize> = (1..d).collect();
        let f1 = attracting_flag(&a, &ks).unwrap();
        let fm = attracting_flag(&a.pow(m), &ks).unwrap();
        for &k in &ks {
            prop_assert!(principal_angle(&f1.subspace(k), &fm.subspace(k)) < 1e-7);
        }
    }

    #[test]
    fn sl_lift_log_moduli_sum_to_zero(d in 2usize..7, a in entries(6)) {
        let a = matrix(d, &a[..d * d]);
        prop_assume!(a.det().norm() > 1e-3);
        let e = eigen_by_modulus(&a.to_sl()).unwrap();
        let s: f64 = e.values.iter().map(|z| z.norm().ln()).sum();
        prop_assert!(s.abs() < 1e-7);
    }

    #[test]
    fn schur_and_charpoly_agree(d in 2usize..5, a in entries(4)) {
        let a = matrix(d, &a[..d * d]);
        let s = schur_eigenvalues(&a).unwrap();
        let c = charpoly_eigenvalues(&a).unwrap();
        // Close eigenvalues are ill-conditioned roots of the polynomial.
        let sep = separation(&s);
        prop_assume!(sep > 1e-2);
        prop_assert!(multiset_distance(&s, &c) < 1e-8 / sep);
    }

    #[test]
    fn exterior_power_of_a_product(d in 2usize..5, k in 1usize..4, a in entries(4), b in entries(4)) {
        prop_assume!(k < d);
        let a = matrix(d, &a[..d * d]);
        let b = matrix(d, &b[..d * d]);
        let lhs = exterior_power(&a.mul(&b), k);
        let rhs = exterior_power(&a, k).mul(&exterior_power(&b, k));
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12 * (1.0 + lhs.norm()));
    }
}

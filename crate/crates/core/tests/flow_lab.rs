use std::sync::OnceLock;

use hyplab_core::flow::*;
use hyplab_core::surface::{fuchsian_reference, ClassCatalog, FuchsianRep};
use proptest::prelude::*;

fn rep() -> &'static FuchsianRep {
    static REP: OnceLock<FuchsianRep> = OnceLock::new();
    REP.get_or_init(|| fuchsian_reference().unwrap())
}

fn bump() -> &'static Bump {
    static BUMP: OnceLock<Bump> = OnceLock::new();
    BUMP.get_or_init(|| Bump::new(rep(), 0.5, 1.0).unwrap())
}

fn orbits(max_len: f64) -> Vec<PeriodicOrbit> {
    let cat = ClassCatalog::enumerate(rep(), max_len).unwrap();
    cat.classes.iter().map(|c| PeriodicOrbit::new(rep(), c).unwrap()).collect()
}

fn short_orbits() -> &'static [PeriodicOrbit] {
    static ORBITS: OnceLock<Vec<PeriodicOrbit>> = OnceLock::new();
    ORBITS.get_or_init(|| orbits(7.0))
}

fn bump_growth() -> &'static GrowthFit {
    static FIT: OnceLock<GrowthFit> = OnceLock::new();
    FIT.get_or_init(|| orbital_growth(rep(), bump(), 11.0, (6.0, 11.0)).unwrap())
}

#[test]
fn every_orbit_closes() {
    let cat = ClassCatalog::enumerate(rep(), 9.0).unwrap();
    for c in &cat.classes {
        let o = PeriodicOrbit::new(rep(), c).unwrap();
        assert!(o.closure_residual < 1e-8, "{} {}", c.rep_word, o.closure_residual);
    }
}

#[test]
fn sampler_agrees_with_the_flow() {
    for o in short_orbits().iter().filter(|o| o.period < 5.0).step_by(5) {
        let x = o.start_vector();
        for s in [0.4, 1.9, o.period - 0.1, o.period + 0.7] {
            let flowed = x.flow(rep(), s).unwrap();
            assert!(flowed.quotient_separation(rep(), &o.state(s)) < 1e-9, "{} at {s}", o.cls.rep_word);
        }
        let round = o.state(1.3).flow(rep(), o.period).unwrap();
        assert!(round.quotient_separation(rep(), &o.state(1.3)) < 1e-9);
    }
}

#[test]
fn constant_potential_integrates_exactly() {
    let c = Constant::new(2.0).unwrap();
    let o = &short_orbits()[7];
    for t in [0.0, 0.3, 2.5, 11.0] {
        assert!((kappa(&c, o, t) - 2.0 * t).abs() < 1e-10);
        assert!((alpha_inverse(&c, o, t) - t / 2.0).abs() < 1e-10);
    }
}

#[test]
fn reparameterized_period_is_basepoint_independent() {
    let r = bump();
    for o in short_orbits().iter().step_by(9) {
        let p = kappa(r, o, o.period);
        assert!(p >= o.period && p <= 1.5 * o.period);
        for k in 1..5 {
            let shifted = o.shifted(o.period * k as f64 / 5.0 + 0.01);
            assert!((kappa(r, &shifted, o.period) - p).abs() < 1e-8);
        }
    }
}

#[test]
fn bump_matches_finer_integration() {
    for o in short_orbits().iter().step_by(11) {
        let a = kappa(bump(), o, o.period);
        let b = kappa_refined(bump(), o, o.period, 10);
        assert!((a - b).abs() < 1e-7, "{a} {b}");
    }
}

#[test]
fn alpha_round_trip_and_dual_solvers() {
    let o = &short_orbits()[30];
    let mut rng = 0.37f64;
    let mut prev = (0.0, 0.0);
    let mut ts: Vec<f64> = (0..100)
        .map(|_| {
            rng = (rng * 9301.0 + 0.49297).fract();
            20.0 * rng
        })
        .collect();
    ts.sort_by(f64::total_cmp);
    for (i, &t) in ts.iter().enumerate() {
        let s = alpha_inverse(bump(), o, t);
        assert!((kappa(bump(), o, s) - t).abs() < 1e-8);
        assert!(s >= prev.1 || t == prev.0, "alpha not monotone");
        prev = (t, s);
        if i % 10 == 0 {
            assert!((alpha_inverse_bisection(bump(), o, t) - s).abs() < 1e-9);
        }
    }
}

#[test]
fn cohomologous_potential_has_the_same_periods() {
    // r(x) = beta(x, T) / T for beta = kappa_1 + G(phi_t x) - G(x).
    let coh = Cohomologous::new(rep(), Constant::new(1.0).unwrap(), 0.5, 2.0).unwrap();
    validate_potential(&coh, &potential_net(500, 3)).unwrap();
    let mut nonconstant = false;
    for o in short_orbits().iter().take(50) {
        let k = kappa(&coh, o, o.period);
        assert!((k - coh.beta_on_orbit(o, o.period)).abs() < 1e-7);
        assert!((k - o.period).abs() < 1e-7);
        nonconstant |= (coh.value(&o.state(0.5)) - 1.0).abs() > 1e-3;
    }
    assert!(nonconstant);
}

#[test]
fn bump_potential_is_validated() {
    let b = bump();
    assert_eq!(b.bounds(), (1.0, 1.5));
    let (lo, hi) = validate_potential(b, &potential_net(NET_POINTS, 11)).unwrap();
    assert!(lo > 1.0 && hi <= 1.5 && hi > 1.49);
    assert!(b.truncation < 1e-2);
}

#[test]
fn potential_strings() {
    let c = parse_potential(rep(), "const:2.0").unwrap();
    assert_eq!(c.bounds(), (2.0, 2.0));
    let b = parse_potential(rep(), "bump:amp=0.5,width=1.0").unwrap();
    assert_eq!(b.name(), "bump:amp=0.5,width=1");
    for bad in ["const:-1", "const:x", "wave:1", "bump:amp=0.5,size=2", "bump:width=0"] {
        assert!(matches!(parse_potential(rep(), bad), Err(hyplab_core::Error::Config(_))), "{bad}");
    }
}

#[test]
fn unit_potential_growth_is_one() {
    let g = orbital_growth(rep(), &Constant::new(1.0).unwrap(), 11.0, (6.0, 11.0)).unwrap();
    assert!((g.slope - 1.0).abs() <= 0.15, "{}", g.slope);
    assert_eq!(g.skipped, 0);
}

#[test]
fn doubled_potential_halves_growth() {
    let g = orbital_growth(rep(), &Constant::new(2.0).unwrap(), 22.0, (12.0, 22.0)).unwrap();
    assert!((g.slope - 0.5).abs() <= 0.1, "{}", g.slope);
    assert_eq!(g.bracket, (0.5, 0.5));
}

#[test]
fn bump_growth_within_variational_bracket() {
    let g = bump_growth();
    assert!(g.slope >= g.bracket.0 - 0.1 && g.slope <= g.bracket.1 + 0.1, "{g:?}");
}

#[test]
fn growth_is_monotone_in_the_potential() {
    let one = orbital_growth(rep(), &Constant::new(1.0).unwrap(), 11.0, (6.0, 11.0)).unwrap();
    let big = orbital_growth(rep(), &Constant::new(1.5).unwrap(), 16.5, (9.0, 16.5)).unwrap();
    let b = bump_growth();
    assert!(one.slope >= b.slope - 0.05);
    assert!(b.slope >= big.slope - 0.05);
}

#[test]
fn growth_rejects_large_radius() {
    let r = orbital_growth(rep(), &Constant::new(1.0).unwrap(), 20.0, (6.0, 20.0));
    assert!(matches!(r, Err(hyplab_core::Error::BudgetExceeded(_))));
    let r = orbital_growth(rep(), &Constant::new(1.0).unwrap(), 10.0, (6.0, 11.0));
    assert!(matches!(r, Err(hyplab_core::Error::Config(_))));
}

#[test]
fn strip_area() {
    for t in 0..=5 {
        let t = t as f64;
        let a = box_area_growth(t);
        assert!((a / (0.5 * t.exp()) - 1.0).abs() < 1e-6);
    }
    assert!((box_area_growth(0.0) - 0.5).abs() < 1e-12);
}

#[test]
fn greedy_packing_dominates_the_bound() {
    let bound = packing_lower_bound(5.0, 0.1, 1.0);
    assert!((bound - 5f64.exp() / (2.0 * std::f64::consts::PI * 0.1f64.sinh())).abs() < 1e-9);
    assert!(greedy_packing(5.0, 0.1) as f64 >= bound);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cocycle_identity(i in 0usize..40, s in 0.0f64..9.0, t in 0.0f64..9.0) {
        let o = &short_orbits()[i * 3];
        let lhs = kappa(bump(), o, s + t);
        let rhs = kappa(bump(), &o.shifted(s), t) + kappa(bump(), o, s);
        prop_assert!((lhs - rhs).abs() < 1e-8);
    }

    #[test]
    fn kappa_within_potential_bounds(i in 0usize..40, t in 0.0f64..15.0) {
        let o = &short_orbits()[i * 3];
        let k = kappa(bump(), o, t);
        prop_assert!(k >= t * (1.0 - 1e-12) && k <= 1.5 * t * (1.0 + 1e-12));
    }

    #[test]
    fn flow_composes(x in -0.5f64..0.5, y in -0.5f64..0.5, theta in 0.0f64..6.28, s in 0.0f64..3.0, t in 0.0f64..3.0) {
        let v = UnitTangent::from_direction([x, y], theta);
        let a = v.flow(rep(), s + t).unwrap();
        let b = v.flow(rep(), s).unwrap().flow(rep(), t).unwrap();
        prop_assert!(a.quotient_separation(rep(), &b) < 1e-9);
        prop_assert!(in_fundamental_domain(a.foot, 1e-9));
    }
}

//! Acceptance suite: criteria 1 to 13, each a deterministic function of the
//! suite seed. Criterion 14 (byte-identical reruns) lives in the command-line
//! front end, which owns the output files.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::entropy::{box_dimension_default, circle_points, dense_words, fuchsian_entropy, koch_points, root_entropy};
use crate::flags::{
    chart_image, hyperconvexity_probe, normalization_samples, quasimobius_constant, required_dims,
    limit_set_view, sample_limit_flags, schwarzian, Mobius, Power, TangentChart,
};
use crate::flow::{
    alpha_inverse, box_area_growth, greedy_packing, kappa, orbital_growth, packing_lower_bound, Bump, Constant,
    PeriodicOrbit,
};
use crate::linalg::{eigen_by_modulus, MatC};
use crate::oracle::brute_force_count;
use crate::rep::{bend, composite, gap_fingerprint_equal, gap_spectrum, irreducible, is_real_gap_spectrum, LinearRep};
use crate::surface::{fuchsian_reference, ClassCatalog, ConjClass, FuchsianRep, Word};
use crate::Result;

pub const CRITERIA: usize = 13;

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub id: usize,
    pub title: String,
    pub passed: bool,
    pub metrics: BTreeMap<String, f64>,
    pub detail: String,
}

impl CriterionReport {
    fn new(id: usize) -> CriterionReport {
        CriterionReport { id, title: title(id).to_string(), passed: true, metrics: BTreeMap::new(), detail: String::new() }
    }

    fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    /// Record a sub-check; the criterion passes only if every check does.
    fn check(&mut self, ok: bool, what: &str) {
        if !ok {
            self.passed = false;
            if !self.detail.is_empty() {
                self.detail.push_str("; ");
            }
            self.detail.push_str(what);
        }
    }
}

pub fn title(id: usize) -> &'static str {
    match id {
        1 => "Fuchsian construction",
        2 => "Conjugacy enumeration matches brute force",
        3 => "Fuchsian entropy",
        4 => "Gap exactness on the Hitchin point",
        5 => "Eigenvalue identity",
        6 => "Rigidity contrast",
        7 => "Gap fingerprint conjugation invariance",
        8 => "Hyperconvexity probe",
        9 => "Quasi-Moebius constants",
        10 => "Box dimension",
        11 => "Flow calculus",
        12 => "Area growth and packing",
        13 => "Schwarzian",
        14 => "Determinism",
        _ => "unknown",
    }
}

fn rng_for(seed: u64, id: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ ((id as u64) << 40))
}

fn iota(rep0: &FuchsianRep, d: usize) -> Result<LinearRep> {
    irreducible(&LinearRep::fuchsian(rep0), d)
}

fn bent_iota(rep0: &FuchsianRep, d: usize, theta: C64) -> Result<LinearRep> {
    bend(&iota(rep0, d)?, &Word::separating_curve(), theta)
}

/// The first `n` classes in catalog order, enlarging the radius as needed.
fn first_classes(rep0: &FuchsianRep, n: usize) -> Result<Vec<ConjClass>> {
    let mut radius = 6.0;
    loop {
        let cat = ClassCatalog::enumerate(rep0, radius)?;
        if cat.len() >= n {
            return Ok(cat.classes[..n].to_vec());
        }
        radius += 0.5;
    }
}

/// Run criterion `id` (1 to 13). Computation errors fail the criterion and are
/// recorded in `detail`.
pub fn run_criterion(id: usize, seed: u64) -> CriterionReport {
    let mut report = CriterionReport::new(id);
    let outcome = match id {
        1 => fuchsian_construction(&mut report),
        2 => enumeration_oracle(&mut report),
        3 => fuchsian_entropy_fit(&mut report),
        4 => gap_exactness(&mut report),
        5 => eigenvalue_identity(&mut report, seed),
        6 => rigidity_contrast(&mut report),
        7 => conjugation_invariance(&mut report, seed),
        8 => hyperconvexity(&mut report, seed),
        9 => quasi_mobius(&mut report, seed),
        10 => box_dimensions(&mut report, seed),
        11 => flow_calculus(&mut report, seed),
        12 => area_growth(&mut report),
        13 => schwarzian_checks(&mut report, seed),
        _ => {
            report.check(false, "no such criterion");
            Ok(())
        }
    };
    if let Err(e) = outcome {
        report.check(false, &format!("{}: {e}", e.code()));
    }
    report
}

pub fn run_suite(seed: u64) -> Vec<CriterionReport> {
    (1..=CRITERIA).map(|id| run_criterion(id, seed)).collect()
}

fn fuchsian_construction(r: &mut CriterionReport) -> Result<()> {
    let rep0 = fuchsian_reference()?;
    r.metric("relator_residual", rep0.relator_residual);
    r.check(rep0.relator_residual < 1e-10, "relator residual >= 1e-10");
    let len = |s: &str| rep0.length(&Word::parse(s)?);
    let gens = [len("a1")?, len("b1")?, len("a2")?, len("b2")?];
    let spread = gens.iter().fold(0.0f64, |m, &l| m.max((l - gens[0]).abs()));
    let pair = (len("a1 b1")? - len("a2 b2")?).abs();
    r.metric("generator_length_spread", spread);
    r.metric("commutator_pair_difference", pair);
    r.check(spread < 1e-9, "generator lengths differ");
    r.check(pair < 1e-9, "l(a1 b1) != l(a2 b2)");
    Ok(())
}

fn enumeration_oracle(r: &mut CriterionReport) -> Result<()> {
    let rep0 = fuchsian_reference()?;
    let brute = brute_force_count(&rep0, 6.0, 5_000_000)?;
    let cat = ClassCatalog::enumerate(&rep0, 6.0)?;
    r.metric("brute_force_classes", brute.classes as f64);
    r.metric("catalog_classes", cat.len() as f64);
    r.check(brute.classes == cat.len(), "class counts differ");
    Ok(())
}

fn fuchsian_entropy_fit(r: &mut CriterionReport) -> Result<()> {
    let rep0 = fuchsian_reference()?;
    let fit = fuchsian_entropy(&rep0, (6.0, 11.0))?;
    r.metric("slope", fit.slope);
    r.metric("slope_stderr", fit.slope_stderr);
    r.check((fit.slope - 1.0).abs() <= 0.15, "slope outside 1 +- 0.15");
    Ok(())
}

fn gap_exactness(r: &mut CriterionReport) -> Result<()> {
    let rep0 = fuchsian_reference()?;
    let classes = first_classes(&rep0, 500)?;
    for d in [3, 5] {
        let rep = iota(&rep0, d)?;
        let (mut rel, mut imag) = (0.0f64, 0.0f64);
        for c in &classes {
            let s = gap_spectrum(&rep, &c.rep_word)?;
            for k in 1..d {
                rel = rel.max((s.log_modulus(k) - c.length).abs() / c.length);
                imag = imag.max(s.gap(k).im.abs());
            }
        }
        r.metric(&format!("d{d}_log_gap_rel_error"), rel);
        r.metric(&format!("d{d}_max_imag"), imag);
        r.check(rel < 1e-8, &format!("d = {d}: log|L^k| != length"));
        r.check(imag < 1e-9, &format!("d = {d}: Im L^k >= 1e-9"));
    }
    Ok(())
}

fn eigenvalue_identity(r: &mut CriterionReport, seed: u64) -> Result<()> {
    let rep0 = fuchsian_reference()?;
    let d = 4;
    let rep = bent_iota(&rep0, d, C64::new(0.0, 0.3))?;
    let cat = ClassCatalog::enumerate(&rep0, 8.0)?;
    let mut rng = rng_for(seed, 5);
    let mut picks = sample(&mut rng, cat.len(), 100).into_vec();
    picks.sort_unstable();
    let mut worst = 0.0f64;
    for i in picks {
        let w = &cat.classes[i].rep_word;
        let lambda1 = eigen_by_modulus(&rep.evaluate(w))?.values[0];
        let s = gap_spectrum(&rep, w)?;
        let product = (1..d).fold(C64::new(1.0, 0.0), |acc, k| acc * s.gap(k).powi((d - k) as i32));
        let lhs = lambda1.powi(d as i32);
        worst = worst.max((lhs - product).norm() / lhs.norm());
    }
    r.metric("max_rel_error", worst);
    r.check(worst < 1e-7, "identity violated beyond 1e-7");
    Ok(())
}

fn rigidity_contrast(r: &mut CriterionReport) -> Result<()> {
    let rep0 = fuchsian_reference()?;
    let base = iota(&rep0, 3)?;
    let bent = bend(&base, &Word::separating_curve(), C64::new(0.0, 0.5))?;
    let classes = first_classes(&rep0, 500)?;
    let real = is_real_gap_spectrum(&bent, &classes, 1e-9)?;
    r.metric("max_gap_argument", real.worst);
    r.check(!real.holds, "bent gap spectrum reported real");
    let window = (6.0, 11.0);
    let h_bent = root_entropy(&bent, &rep0, 1, window.1, window)?;
    let h_base = root_entropy(&base, &rep0, 1, window.1, window)?;
    let excess = h_bent.slope - h_base.slope;
    r.metric("bent_slope", h_bent.slope);
    r.metric("fuchsian_slope", h_base.slope);
    r.metric("slope_excess", excess);
    r.check(excess >= 0.02, "entropy excess below 0.02");
    Ok(())
}

/// A random matrix `I + 0.5 X` with `X` entries uniform in the unit square,
/// normalized to determinant one.
fn random_conjugator(rng: &mut ChaCha8Rng, d: usize) -> MatC {
    let m = MatC::from_fn(d, |i, j| {
        let z = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if i == j {
            C64::new(1.0, 0.0) + 0.5 * z
        } else {
            0.5 * z
        }
    });
    m.to_sl()
}

fn conjugation_invariance(r: &mut CriterionReport, seed: u64) -> Result<()> {
    let rep0 = fuchsian_reference()?;
    let base = iota(&rep0, 3)?;
    let classes = first_classes(&rep0, 200)?;
    let mut rng = rng_for(seed, 7);
    let mut worst = 0.0f64;
    for subject in [base.clone(), bend(&base, &Word::separating_curve(), C64::new(0.0, 0.3))?] {
        let p = random_conjugator(&mut rng, 3);
        let conj = subject.conjugate(&p)?;
        worst = worst.max(gap_fingerprint_equal(&subject, &conj, &classes, 1e-9)?.worst);
    }
    r.metric("conjugation_deviation", worst);
    r.check(worst < 1e-9, "conjugation changed the gaps");
    let bent = bend(&base, &Word::separating_curve(), C64::new(0.0, 0.2))?;
    let cmp = gap_fingerprint_equal(&base, &bent, &classes, 1e-9)?;
    r.metric("bend_deviation", cmp.worst);
    r.check(!cmp.holds, "bend 0.2i not detected");
    Ok(())
}

fn hyperconvexity(r: &mut CriterionReport, seed: u64) -> Result<()> {
    let rep0 = fuchsian_reference()?;
    let cat = ClassCatalog::enumerate(&rep0, 8.0)?;
    let words: Vec<Word> = cat.classes.iter().map(|c| c.rep_word.clone()).collect();
    let f = LinearRep::fuchsian(&rep0);
    let hitchin = irreducible(&f, 5)?;
    for k in 1..5 {
        let rep = hyperconvexity_probe(&hitchin, &rep0, &words, k, 200, 10, seed);
        r.metric(&format!("iota5_k{k}_failures"), rep.failures as f64);
        r.check(rep.failures == 0, &format!("iota_5 k = {k}: {} failures", rep.failures));
    }
    let split = composite(&f, &[3, 1])?;
    let rep = hyperconvexity_probe(&split, &rep0, &words, 1, 200, 10, seed);
    r.metric("iota31_k1_failures", rep.failures as f64);
    r.metric("iota31_k1_gap_failures", rep.gap_failures as f64);
    r.check(rep.failures == 0, &format!("iota_(3,1) k = 1: {} failures", rep.failures));
    Ok(())
}

/// K-hat at the given base points (indices into the sample set) for a sample
/// budget of `n`.
fn k_hats(rep: &LinearRep, rep0: &FuchsianRep, n: usize, bases: &[usize], seed: u64) -> Result<Vec<f64>> {
    let dims = required_dims(rep.d, 1);
    let set = sample_limit_flags(rep, rep0, n, &dims)?;
    let ns = normalization_samples(rep, rep0, &dims)?;
    bases
        .iter()
        .map(|&b| {
            let chart = TangentChart::new(&set.samples[b], [&ns[0], &ns[1], &ns[2]], 1)?;
            Ok(quasimobius_constant(&chart_image(&chart, &set.samples), 20_000, seed)?.k_hat)
        })
        .collect()
}

fn quasi_mobius(r: &mut CriterionReport, seed: u64) -> Result<()> {
    let rep0 = fuchsian_reference()?;
    let bases: Vec<usize> = (0..20).map(|i| 10 * i).collect();
    let fuchsian = k_hats(&iota(&rep0, 3)?, &rep0, 200, &bases, seed)?;
    let worst = fuchsian.iter().fold(0.0f64, |m, k| m.max((k - 1.0).abs()));
    r.metric("fuchsian_max_deviation", worst);
    r.check(worst <= 0.05, "Fuchsian K-hat outside 1 +- 0.05");
    let bent = bent_iota(&rep0, 3, C64::new(0.0, 0.3))?;
    let coarse = k_hats(&bent, &rep0, 200, &bases, seed)?;
    let fine = k_hats(&bent, &rep0, 400, &bases, seed)?;
    let mut drift = 0.0f64;
    for (a, b) in coarse.iter().zip(&fine) {
        r.check(a.is_finite() && b.is_finite(), "bent K-hat not finite");
        drift = drift.max((b / a - 1.0).abs());
    }
    r.metric("bent_max_k_hat", fine.iter().cloned().fold(1.0, f64::max));
    r.metric("bent_doubling_drift", drift);
    r.check(drift <= 0.1, "bent K-hat moved more than 10% under doubling");
    Ok(())
}

fn box_dimensions(r: &mut CriterionReport, seed: u64) -> Result<()> {
    let circle = box_dimension_default(&circle_points(100_000), seed)?;
    r.metric("circle", circle.slope);
    r.check((circle.slope - 1.0).abs() <= 0.05, "circle dimension outside 1 +- 0.05");
    let koch = box_dimension_default(&koch_points(7, 1), seed)?;
    r.metric("koch", koch.slope);
    r.check((koch.slope - 1.262).abs() <= 0.05, "Koch dimension outside 1.262 +- 0.05");

    let rep0 = fuchsian_reference()?;
    let view = limit_set_view(&iota(&rep0, 3)?, &rep0, &dense_words(&rep0, 100_000), 1)?;
    let points: Vec<[f64; 2]> = view.iter().map(|p| [p.x, p.y]).collect();
    r.metric("fuchsian_points", points.len() as f64);
    let limit = box_dimension_default(&points, seed)?;
    r.metric("fuchsian_limit", limit.slope);
    r.check((limit.slope - 1.0).abs() <= 0.05, "Fuchsian limit dimension outside 1 +- 0.05");
    Ok(())
}

fn flow_calculus(r: &mut CriterionReport, seed: u64) -> Result<()> {
    let rep0 = fuchsian_reference()?;
    let bump = Bump::new(&rep0, 0.5, 1.0)?;
    let cat = ClassCatalog::enumerate(&rep0, 7.0)?;
    let orbits: Vec<PeriodicOrbit> = cat.classes.iter().map(|c| PeriodicOrbit::new(&rep0, c)).collect::<Result<_>>()?;
    let mut rng = rng_for(seed, 11);

    let mut cocycle = 0.0f64;
    for _ in 0..50 {
        let o = &orbits[rng.random_range(0..orbits.len())];
        let (s, t) = (rng.random_range(0.0..9.0), rng.random_range(0.0..9.0));
        let lhs = kappa(&bump, o, s + t);
        let rhs = kappa(&bump, &o.shifted(s), t) + kappa(&bump, o, s);
        cocycle = cocycle.max((lhs - rhs).abs());
    }
    r.metric("cocycle_residual", cocycle);
    r.check(cocycle < 1e-8, "cocycle residual >= 1e-8");

    let mut round_trip = 0.0f64;
    for _ in 0..50 {
        let o = &orbits[rng.random_range(0..orbits.len())];
        let t = rng.random_range(0.0..20.0);
        round_trip = round_trip.max((kappa(&bump, o, alpha_inverse(&bump, o, t)) - t).abs());
    }
    r.metric("alpha_round_trip", round_trip);
    r.check(round_trip < 1e-8, "alpha round trip >= 1e-8");

    let doubled = orbital_growth(&rep0, &Constant::new(2.0)?, 22.0, (12.0, 22.0))?;
    r.metric("constant2_slope", doubled.slope);
    r.check((doubled.slope - 0.5).abs() <= 0.1, "constant potential slope outside 0.5 +- 0.1");

    let g = orbital_growth(&rep0, &bump, 11.0, (6.0, 11.0))?;
    r.metric("bump_slope", g.slope);
    r.metric("bump_bracket_lo", g.bracket.0);
    r.metric("bump_bracket_hi", g.bracket.1);
    r.check(
        g.slope >= g.bracket.0 - 0.1 && g.slope <= g.bracket.1 + 0.1,
        "bump slope outside the variational bracket",
    );
    Ok(())
}

fn area_growth(r: &mut CriterionReport) -> Result<()> {
    let mut worst = 0.0f64;
    for t in 0..=5 {
        let t = t as f64;
        worst = worst.max((box_area_growth(t) / (0.5 * t.exp()) - 1.0).abs());
    }
    r.metric("area_rel_error", worst);
    r.check(worst < 1e-6, "area differs from e^t/2");
    let bound = packing_lower_bound(5.0, 0.1, 1.0);
    let greedy = greedy_packing(5.0, 0.1);
    r.metric("packing_bound", bound);
    r.metric("greedy_packing", greedy as f64);
    r.check(greedy as f64 >= bound, "greedy packing below the bound");
    Ok(())
}

fn schwarzian_checks(r: &mut CriterionReport, seed: u64) -> Result<()> {
    let mut rng = rng_for(seed, 13);
    let c = |rng: &mut ChaCha8Rng| C64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    let mut worst = 0.0f64;
    let mut tested = 0;
    while tested < 100 {
        let m = Mobius { a: c(&mut rng), b: c(&mut rng), c: c(&mut rng), d: c(&mut rng) };
        let z = c(&mut rng);
        // Stay away from degenerate maps and the pole.
        if (m.a * m.d - m.b * m.c).norm() < 0.1 || (m.c * z + m.d).norm() < 0.1 {
            continue;
        }
        worst = worst.max(schwarzian(&m, z)?.norm());
        tested += 1;
    }
    r.metric("mobius_max_abs", worst);
    r.check(worst < 1e-8, "Moebius Schwarzian >= 1e-8");
    let s = schwarzian(&Power(2), C64::new(1.0, 0.0))?;
    r.metric("square_at_one_re", s.re);
    r.metric("square_at_one_im", s.im);
    r.check((s - C64::new(-1.5, 0.0)).norm() < 1e-6, "S(z^2)(1) != -3/2");
    Ok(())
}

//! Limit flags, tangent projections, Veronese flags, and the distortion
//! estimates built on them.
//!
//! A boundary point of the group is represented by the attracting fixed point
//! of the reference Fuchsian image of a word, stored as a disk angle.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eigen_by_modulus, k_subsets, RANK_TOL, orthonormalize, svd_right, Flag, C64};
use crate::rep::{balanced_core, gap, LinearRep};
use crate::surface::{ClassCatalog, FuchsianRep, Word};

/// Attracting flag of `rep(w)` with members of the given dimensions.
///
/// Each `k`-plane is recovered from the dominant eigenvector of the `k`-th
/// exterior power, whose gap is the `k`-th gap of `w`. Reading the plane off
/// individual eigenvectors of `rep(w)` loses the lower ones once the spread
/// of eigenvalue moduli approaches `1e15`.
pub fn limit_flag(rep: &LinearRep, w: &Word, dims: &[usize]) -> Result<Flag> {
    let d = rep.d;
    let mut dims: Vec<usize> = dims.iter().copied().filter(|&k| k > 0 && k < d).collect();
    dims.sort_unstable();
    dims.dedup();
    // The flag of p c p^{-1} is rep(p) applied to the flag of c, one letter
    // at a time to avoid forming the badly conditioned conjugate.
    let (p, core) = balanced_core(rep, w);
    let mut frame = DMatrix::<C64>::zeros(d, 0);
    for &k in &dims {
        gap(rep, &core, k)?;
        let e = eigen_by_modulus(&rep.evaluate_exterior(&core, k))?;
        let plane = plucker_plane(&e.vector(0), d, k);
        frame = extend_frame(&frame, &plane, k);
    }
    let mut flag = Flag { dims, frame };
    for &l in p.letters().iter().rev() {
        flag = flag.transform(rep.gen(l));
    }
    Ok(flag)
}

/// Orthonormal basis of the `k`-plane whose Pluecker coordinates (in the
/// lexicographic basis of `k`-subsets) are `omega`, from the span of its
/// contractions with `(k-1)`-covectors.
pub fn plucker_plane(omega: &DVector<C64>, d: usize, k: usize) -> DMatrix<C64> {
    let subsets = k_subsets(d, k);
    let index: std::collections::HashMap<&[usize], usize> =
        subsets.iter().enumerate().map(|(i, s)| (s.as_slice(), i)).collect();
    let faces = k_subsets(d, k - 1);
    let mut m = DMatrix::<C64>::zeros(d, faces.len());
    for (c, face) in faces.iter().enumerate() {
        for j in 0..d {
            if face.contains(&j) {
                continue;
            }
            let mut full = face.clone();
            full.push(j);
            full.sort_unstable();
            let above = face.iter().filter(|&&x| x > j).count();
            let sign = if above % 2 == 0 { 1.0 } else { -1.0 };
            m[(j, c)] = omega[index[full.as_slice()]] * sign;
        }
    }
    let (_, vecs) = svd_right(&m.adjoint());
    vecs.columns(0, k).into_owned()
}

/// The intersection of two subspaces whose dimensions sum to `d + 1`, which
/// is at least a line. Fails when a second direction is numerically null,
/// at rank tolerance relative to the top singular value of `(I - P_v) u`.
pub fn forced_intersection(u: &DMatrix<C64>, v: &DMatrix<C64>) -> Result<DVector<C64>> {
    let d = u.nrows();
    debug_assert_eq!(u.ncols() + v.ncols(), d + 1);
    if v.ncols() == d {
        // v is everything (the degenerate member C^d), so u is the line.
        return Ok(u.column(0).normalize());
    }
    let m =u - v * (v.adjoint() * u);
    let (sv, vecs) = svd_right(&m);
    let n = u.ncols();
    let top = sv[0];
    let null = sv[..n].iter().filter(|&&s| s <= RANK_TOL * top).count();
    if top <= RANK_TOL || null > 1 {
        return Err(Error::TransversalityFailure { dim: null.max(if top <= RANK_TOL { n } else { 0 }) });
    }
    Ok((u * vecs.column(n - 1)).normalize())
}

/// Orthonormal basis of the orthogonal complement of the column span of `w`.
fn complement(w: &DMatrix<C64>) -> DMatrix<C64> {
    let d = w.nrows();
    let (_, vecs) = svd_right(&w.adjoint());
    vecs.columns(w.ncols(), d - w.ncols()).into_owned()
}

/// Append to the orthonormal `frame` the directions of `target` (spanning a
/// `k`-dimensional space that nearly contains the frame) that it is missing,
/// by pivoted Gram-Schmidt.
fn extend_frame(frame: &DMatrix<C64>, target: &DMatrix<C64>, k: usize) -> DMatrix<C64> {
    let d = target.nrows();
    let mut out = DMatrix::<C64>::zeros(d, k);
    out.columns_mut(0, frame.ncols()).copy_from(frame);
    let mut rest = orthonormalize(target);
    for c in frame.ncols()..k {
        for _ in 0..2 {
            let basis = out.columns(0, c);
            rest -= basis * (basis.adjoint() * &rest);
        }
        let best = (0..rest.ncols())
            .max_by(|&i, &j| rest.column(i).norm().total_cmp(&rest.column(j).norm()))
            .expect("target has columns");
        let v = rest.column(best).normalize();
        out.set_column(c, &v);
    }
    out
}

#[derive(Clone, Debug)]
pub struct FlagSample {
    pub word: Word,
    /// Disk angle in `[0, 2pi)` of the attracting fixed point of `rho_0(word)`.
    pub angle: f64,
    pub flag: Flag,
}

#[derive(Clone, Debug, Default)]
pub struct SampleSet {
    pub samples: Vec<FlagSample>,
    pub skipped: Vec<(Word, Error)>,
}

/// Sample attracting flags for `words` in order, keeping the first `budget`
/// with pairwise distinct boundary points. Words that are not hyperbolic for
/// the reference group are ignored; words failing the gap precondition are
/// recorded in `skipped`.
pub fn sample_words(
    rep: &LinearRep,
    rep0: &FuchsianRep,
    words: &[Word],
    budget: usize,
    dims: &[usize],
) -> SampleSet {
    let mut out = SampleSet::default();
    let mut seen = HashSet::new();
    for w in words {
        if out.samples.len() >= budget {
            break;
        }
        let g = rep0.evaluate(w);
        if !g.is_hyperbolic() {
            continue;
        }
        let angle = g.fixed_angles().0;
        if !seen.insert((angle * 1e10).round() as i64) {
            continue;
        }
        match limit_flag(rep, w, dims) {
            Ok(flag) => out.samples.push(FlagSample { word: w.clone(), angle, flag }),
            Err(e) => out.skipped.push((w.clone(), e)),
        }
    }
    out
}

/// One sample per conjugacy class (the class list contains each class and
/// its inverse), enumerating classes by increasing length until `budget`
/// samples are available or the radius reaches 12.
pub fn sample_limit_flags(
    rep: &LinearRep,
    rep0: &FuchsianRep,
    budget: usize,
    dims: &[usize],
) -> Result<SampleSet> {
    let mut radius = 6.0;
    loop {
        let cat = ClassCatalog::enumerate(rep0, radius)?;
        let words: Vec<Word> = cat.classes.iter().map(|c| c.rep_word.clone()).collect();
        let set = sample_words(rep, rep0, &words, budget, dims);
        if set.samples.len() >= budget || radius >= 12.0 {
            return Ok(set);
        }
        radius += 1.0;
    }
}

/// Words whose attracting points fix the chart: `a1`, `b1`, `a1 b1`.
pub fn normalization_words() -> [Word; 3] {
    ["a1", "b1", "a1 b1"].map(|s| Word::parse(s).expect("valid word"))
}

/// A point of the fibre `CP^1`, either finite or the point at infinity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChartCoord {
    Finite(C64),
    Infinity,
}

#[derive(Clone, Copy, Debug)]
pub struct TangentChartPoint {
    pub base_angle: f64,
    pub k: usize,
    pub coord: ChartCoord,
    /// Unit homogeneous coordinates `[num : den]` of `coord`.
    pub hom: [C64; 2],
}

impl TangentChartPoint {
    fn from_hom(base_angle: f64, k: usize, num: C64, den: C64) -> TangentChartPoint {
        let n = (num.norm_sqr() + den.norm_sqr()).sqrt();
        let coord = if den == C64::new(0.0, 0.0) { ChartCoord::Infinity } else { ChartCoord::Finite(num / den) };
        TangentChartPoint { base_angle, k, coord, hom: [num / n, den / n] }
    }

    pub fn finite(&self) -> Option<C64> {
        match self.coord {
            ChartCoord::Finite(z) => Some(z),
            ChartCoord::Infinity => None,
        }
    }
}

fn hdet(u: [C64; 2], v: [C64; 2]) -> C64 {
    u[0] * v[1] - u[1] * v[0]
}

/// Chordal distance on the Riemann sphere (diameter 2) between homogeneous
/// points.
pub fn chordal_hom(u: [C64; 2], v: [C64; 2]) -> f64 {
    let nu = (u[0].norm_sqr() + u[1].norm_sqr()).sqrt();
    let nv = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    2.0 * hdet(u, v).norm() / (nu * nv)
}

pub fn chordal(a: &TangentChartPoint, b: &TangentChartPoint) -> f64 {
    chordal_hom(a.hom, b.hom)
}

/// Tangent projection at a fixed base point `z`, in the chart sending the
/// projections of the three normalization samples to `0, 1, infinity`.
#[derive(Clone, Debug)]
pub struct TangentChart {
    pub k: usize,
    pub base: FlagSample,
    /// Orthonormal basis of `z^{k+1}` modulo `z^{k-1}`.
    quotient: DMatrix<C64>,
    normalizers: [(f64, [C64; 2]); 3],
}

/// Orthonormal `d x m` frame whose first `j` columns span the `j`-member of
/// the flag for `j` in `{k-1, k, k+1}`, completed when `m = d`.
fn frame_prefix(flag: &Flag, m: usize) -> DMatrix<C64> {
    let d = flag.ambient_dim();
    if m <= flag.max_dim() {
        return flag.frame.columns(0, m).into_owned();
    }
    let have = flag.frame.clone();
    let extra = complement(&have);
    let mut out = DMatrix::<C64>::zeros(d, m);
    out.columns_mut(0, have.ncols()).copy_from(&have);
    out.columns_mut(have.ncols(), m - have.ncols()).copy_from(&extra.columns(0, m - have.ncols()));
    out
}

pub fn required_dims(d: usize, k: usize) -> Vec<usize> {
    let mut v: Vec<usize> = [k.wrapping_sub(1), k, k + 1, d - k]
        .into_iter()
        .filter(|&j| j >= 1 && j < d)
        .collect();
    v.sort_unstable();
    v.dedup();
    v
}

impl TangentChart {
    pub fn new(z: &FlagSample, normalizers: [&FlagSample; 3], k: usize) -> Result<TangentChart> {
        let d = z.flag.ambient_dim();
        if k == 0 || k >= d {
            return Err(Error::DimensionMismatch(format!("tangent index {k} outside 1..{}", d - 1)));
        }
        for j in required_dims(d, k) {
            if !z.flag.has(j) || normalizers.iter().any(|n| !n.flag.has(j)) {
                return Err(Error::DimensionMismatch(format!("flag lacks its {j}-dimensional member")));
            }
        }
        let frame = frame_prefix(&z.flag, k + 1);
        let quotient = frame.columns(k - 1, 2).into_owned();
        let mut chart = TangentChart {
            k,
            base: z.clone(),
            quotient,
            normalizers: [(0.0, [C64::new(0.0, 0.0); 2]); 3],
        };
        let mut norms = [(0.0, [C64::new(0.0, 0.0); 2]); 3];
        for (slot, n) in norms.iter_mut().zip(normalizers) {
            *slot = (n.angle, chart.raw(n)?);
        }
        let [p0, p1, pinf] = norms.map(|x| x.1);
        if chordal_hom(p0, p1) < 1e-12 || chordal_hom(p0, pinf) < 1e-12 || chordal_hom(p1, pinf) < 1e-12 {
            return Err(Error::DegenerateInput("normalization points coincide in the fibre".into()));
        }
        chart.normalizers = norms;
        Ok(chart)
    }

    /// Homogeneous coordinates of `[x^{d-k} cap z^{k+1}]` in the quotient basis.
    pub fn raw(&self, x: &FlagSample) -> Result<[C64; 2]> {
        let d = self.base.flag.ambient_dim();
        let k = self.k;
        let v: DVector<C64> = if same_point(x.angle, self.base.angle) {
            frame_prefix(&self.base.flag, k).column(k - 1).into_owned()
        } else {
            if !x.flag.has(d - k) {
                return Err(Error::DimensionMismatch(format!("flag lacks its {}-dimensional member", d - k)));
            }
            let upper = frame_prefix(&self.base.flag, k + 1);
            match forced_intersection(&x.flag.subspace(d - k), &upper) {
                Ok(v) => v,
                // Too close to z to resolve the intersection; use the limit.
                Err(_) if angle_gap(x.angle, self.base.angle) < CONTINUITY_RADIUS => {
                    frame_prefix(&self.base.flag, k).column(k - 1).into_owned()
                }
                Err(e) => return Err(e),
            }
        };
        let c = self.quotient.adjoint() * v;
        Ok([c[0], c[1]])
    }

    pub fn project(&self, x: &FlagSample) -> Result<TangentChartPoint> {
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        for (i, (angle, _)) in self.normalizers.iter().enumerate() {
            if same_point(x.angle, *angle) && !same_point(x.angle, self.base.angle) {
                let (num, den) = [(zero, one), (one, one), (one, zero)][i];
                return Ok(TangentChartPoint::from_hom(self.base.angle, self.k, num, den));
            }
        }
        let u = self.raw(x)?;
        let [(_, p0), (_, p1), (_, pinf)] = self.normalizers;
        let num = hdet(u, p0) * hdet(p1, pinf);
        let den = hdet(u, pinf) * hdet(p1, p0);
        Ok(TangentChartPoint::from_hom(self.base.angle, self.k, num, den))
    }
}

/// Boundary points closer than this to the base point whose intersection is
/// numerically unresolvable are sent to the continuity value `[z^k]`.
const CONTINUITY_RADIUS: f64 = 1e-7;

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * std::f64::consts::PI);
    d.min(2.0 * std::f64::consts::PI - d)
}

fn same_point(a: f64, b: f64) -> bool {
    angle_gap(a, b) < 1e-12
}

pub fn tangent_project(
    z: &FlagSample,
    x: &FlagSample,
    normalizers: [&FlagSample; 3],
    k: usize,
) -> Result<TangentChartPoint> {
    TangentChart::new(z, normalizers, k)?.project(x)
}

/// Flags of the normalization words, with the dimensions needed for `k`.
pub fn normalization_samples(rep: &LinearRep, rep0: &FuchsianRep, dims: &[usize]) -> Result<[FlagSample; 3]> {
    let words = normalization_words();
    let mut out = Vec::with_capacity(3);
    for w in words {
        let flag = limit_flag(rep, &w, dims)?;
        out.push(FlagSample { angle: rep0.evaluate(&w).fixed_angles().0, word: w, flag });
    }
    Ok(out.try_into().expect("three samples"))
}

// ----- Veronese flags -----

/// Coefficients, in the basis `X^{n-j} Y^j`, of the product of two
/// homogeneous polynomials given in the same kind of basis.
fn poly_mul(p: &[C64], q: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

fn poly_pow(q: &[C64], n: usize) -> Vec<C64> {
    (0..n).fold(vec![C64::new(1.0, 0.0)], |acc, _| poly_mul(&acc, q))
}

/// The Veronese flag of the linear form `Q = q0 X + q1 Y` in dimension `d`:
/// `nu^k(Q) = Q^{d-k} C_{k-1}[X, Y]` for `k = 1..d-1`.
pub fn veronese_flag(q: [C64; 2], d: usize) -> Result<Flag> {
    if q[0].norm() == 0.0 && q[1].norm() == 0.0 {
        return Err(Error::DegenerateInput("zero linear form".into()));
    }
    // A second linear form completing Q to a basis of the linear forms.
    let p = if q[1].norm() >= q[0].norm() { [C64::new(1.0, 0.0), C64::new(0.0, 0.0)] } else { [C64::new(0.0, 0.0), C64::new(1.0, 0.0)] };
    let cols: Vec<DVector<C64>> = (0..d - 1)
        .map(|j| DVector::from_vec(poly_mul(&poly_pow(&q, d - 1 - j), &poly_pow(&p, j))))
        .collect();
    let m = DMatrix::from_columns(&cols);
    Ok(Flag { dims: (1..d).collect(), frame: orthonormalize(&m) })
}

/// Representative `Q^{d-1-k} P^k` of the Veronese tangent line at `Q` in the
/// direction of `P`.
pub fn veronese_tangent(q: [C64; 2], p: [C64; 2], d: usize, k: usize) -> Result<DVector<C64>> {
    if q[0].norm() == 0.0 && q[1].norm() == 0.0 {
        return Err(Error::DegenerateInput("zero linear form".into()));
    }
    let cross = (q[0] * p[1] - q[1] * p[0]).norm();
    if cross <= 1e-14 * (q[0].norm() + q[1].norm()) * (p[0].norm() + p[1].norm()) {
        return Err(Error::DegenerateInput("P is proportional to Q".into()));
    }
    if k + 1 > d {
        return Err(Error::DimensionMismatch(format!("k = {k} too large for d = {d}")));
    }
    Ok(DVector::from_vec(poly_mul(&poly_pow(&q, d - 1 - k), &poly_pow(&p, k))))
}

/// Linear form whose `(d-1)`-th power spans the Veronese line of the boundary
/// point at disk angle `phi`.
pub fn boundary_form(phi: f64) -> [C64; 2] {
    // [v0 : v1] with disk angle -2 atan2(v1, v0)
    let t = -0.5 * phi;
    [C64::new(t.cos(), 0.0), C64::new(t.sin(), 0.0)]
}

// ----- Hyperconvexity -----

#[derive(Clone, Debug, Default, Serialize)]
pub struct HyperconvexityReport {
    pub k: usize,
    pub quadruples: usize,
    /// Smallest pairwise chordal distance among projected quadruples.
    pub min_separation: f64,
    pub failures: usize,
    pub coincidences: usize,
    pub gap_failures: usize,
    pub transversality_failures: usize,
}

/// Minimum angular spacing of the probe's boundary points. Near the base
/// point the intersection `x^{d-k} cap z^{k+1}` has a second singular value of
/// order `|x - z|^k`, which drops below the rank tolerance for closer pairs.
pub const PROBE_SPACING: f64 = 1e-2;

/// Project cyclically ordered quadruples of boundary points through tangent
/// charts at random base points and count coincidences below `1e-7`.
///
/// Boundary points are the attracting points of `words`, thinned in order to
/// spacing [`PROBE_SPACING`].
///
/// Precondition failures (a missing gap at a base point, a normalizer, or a
/// quadruple point, or a transversality failure) are counted per quadruple.
#[allow(clippy::too_many_arguments)]
pub fn hyperconvexity_probe(
    rep: &LinearRep,
    rep0: &FuchsianRep,
    words: &[Word],
    k: usize,
    n_quadruples: usize,
    n_basepoints: usize,
    seed: u64,
) -> HyperconvexityReport {
    let d = rep.d;
    let dims = required_dims(d, k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = HyperconvexityReport { k, min_separation: f64::INFINITY, ..Default::default() };

    let normal_words = normalization_words();
    let pool: Vec<Word> = words.iter().filter(|w| !normal_words.contains(w)).cloned().collect();
    let angles: Vec<Option<f64>> = pool
        .iter()
        .map(|w| {
            let g = rep0.evaluate(w);
            g.is_hyperbolic().then(|| g.fixed_angles().0)
        })
        .collect();
    let mut usable: Vec<usize> = Vec::new();
    for i in 0..pool.len() {
        let Some(a) = angles[i] else { continue };
        if usable.iter().all(|&j| angle_gap(a, angles[j].expect("kept")) >= PROBE_SPACING) {
            usable.push(i);
        }
    }
    let mut cache: Vec<Option<std::result::Result<FlagSample, Error>>> = vec![None; pool.len()];
    let mut sample_of = |i: usize| -> std::result::Result<FlagSample, Error> {
        cache[i]
            .get_or_insert_with(|| {
                limit_flag(rep, &pool[i], &dims).map(|flag| FlagSample {
                    word: pool[i].clone(),
                    angle: angles[i].expect("usable"),
                    flag,
                })
            })
            .clone()
    };

    let normalizers = normalization_samples(rep, rep0, &dims);
    if usable.len() < 5 {
        report.failures = n_quadruples * n_basepoints;
        return report;
    }
    let bases: Vec<usize> = sample(&mut rng, usable.len(), n_basepoints.min(usable.len()))
        .into_iter()
        .map(|i| usable[i])
        .collect();
    for &b in &bases {
        let chart = match (&normalizers, sample_of(b)) {
            (Ok(ns), Ok(z)) => TangentChart::new(&z, [&ns[0], &ns[1], &ns[2]], k),
            (Err(e), _) => Err(e.clone()),
            (_, Err(e)) => Err(e),
        };
        for _ in 0..n_quadruples {
            report.quadruples += 1;
            let chart = match &chart {
                Ok(c) => c,
                Err(e) => {
                    count_error(&mut report, e);
                    continue;
                }
            };
            let mut picks: Vec<usize> = Vec::with_capacity(4);
            while picks.len() < 4 {
                let i = usable[rng.random_range(0..usable.len())];
                if i != b && !picks.contains(&i) {
                    picks.push(i);
                }
            }
            picks.sort_by(|&i, &j| angles[i].unwrap().total_cmp(&angles[j].unwrap()));
            let mut pts = Vec::with_capacity(4);
            let mut err = None;
            for &i in &picks {
                match sample_of(i).and_then(|x| chart.project(&x)) {
                    Ok(p) => pts.push(p),
                    Err(e) => {
                        err = Some(e);
                        break;
                    }
                }
            }
            if let Some(e) = err {
                count_error(&mut report, &e);
                continue;
            }
            let mut sep = f64::INFINITY;
            for i in 0..4 {
                for j in i + 1..4 {
                    sep = sep.min(chordal(&pts[i], &pts[j]));
                }
            }
            report.min_separation = report.min_separation.min(sep);
            if sep < 1e-7 {
                report.coincidences += 1;
                report.failures += 1;
            }
        }
    }
    report
}

fn count_error(report: &mut HyperconvexityReport, e: &Error) {
    report.failures += 1;
    match e {
        Error::InsufficientGap { .. } => report.gap_failures += 1,
        Error::TransversalityFailure { .. } => report.transversality_failures += 1,
        _ => {}
    }
}

// ----- Quasi-Moebius distortion -----

#[derive(Clone, Debug, Serialize)]
pub struct QuasiMobius {
    pub k_hat: f64,
    pub quadruples: usize,
    pub degenerate: usize,
}

/// Metric cross-ratio `|a-c||b-d| / (|a-b||c-d|)` in the chordal metric.
fn cross_ratio(p: [[C64; 2]; 4]) -> Option<f64> {
    let ab = chordal_hom(p[0], p[1]);
    let cd = chordal_hom(p[2], p[3]);
    let ac = chordal_hom(p[0], p[2]);
    let bd = chordal_hom(p[1], p[3]);
    let floor = 1e-12;
    if ab < floor || cd < floor || ac < floor || bd < floor {
        return None;
    }
    Some(ac * bd / (ab * cd))
}

/// Largest multiplicative distortion of metric cross-ratios from the boundary
/// circle (parameter = disk angle) to the chart.
///
/// All quadruples are used when there are at most `max_quadruples` of them;
/// otherwise that many are drawn with the given seed.
pub fn quasimobius_constant(
    points: &[(f64, TangentChartPoint)],
    max_quadruples: usize,
    seed: u64,
) -> Result<QuasiMobius> {
    let n = points.len();
    if n < 8 {
        return Err(Error::TooFewPoints { got: n, need: 8 });
    }
    let source: Vec<[C64; 2]> = points
        .iter()
        .map(|(phi, _)| [C64::from_polar(1.0, *phi), C64::new(1.0, 0.0)])
        .collect();
    let image: Vec<[C64; 2]> = points.iter().map(|(_, p)| p.hom).collect();
    let mut out = QuasiMobius { k_hat: 1.0, quadruples: 0, degenerate: 0 };
    let mut visit = |q: [usize; 4]| {
        let s = cross_ratio(q.map(|i| source[i]));
        let t = cross_ratio(q.map(|i| image[i]));
        match (s, t) {
            (Some(s), Some(t)) => {
                let r = t / s;
                out.k_hat = out.k_hat.max(r.max(1.0 / r));
                out.quadruples += 1;
            }
            _ => out.degenerate += 1,
        }
    };
    let total = binomial4(n);
    if total <= max_quadruples as f64 {
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    for d in c + 1..n {
                        visit([a, b, c, d]);
                    }
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..max_quadruples {
            let idx = sample(&mut rng, n, 4).into_vec();
            visit([idx[0], idx[1], idx[2], idx[3]]);
        }
    }
    Ok(out)
}

fn binomial4(n: usize) -> f64 {
    let n = n as f64;
    n * (n - 1.0) * (n - 2.0) * (n - 3.0) / 24.0
}

// ----- Schwarzian derivative -----

/// A holomorphic map, optionally with closed-form derivatives.
pub trait HolomorphicMap {
    fn value(&self, z: C64) -> C64;

    /// `(f', f'', f''')` when known in closed form.
    fn derivatives(&self, _z: C64) -> Option<[C64; 3]> {
        None
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Mobius {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl HolomorphicMap for Mobius {
    fn value(&self, z: C64) -> C64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    fn derivatives(&self, z: C64) -> Option<[C64; 3]> {
        let det = self.a * self.d - self.b * self.c;
        let w = C64::new(1.0, 0.0) / (self.c * z + self.d);
        let w2 = w * w;
        Some([det * w2, -2.0 * det * self.c * w2 * w, 6.0 * det * self.c * self.c * w2 * w2])
    }
}

/// `z^n`.
#[derive(Clone, Copy, Debug)]
pub struct Power(pub i32);

impl HolomorphicMap for Power {
    fn value(&self, z: C64) -> C64 {
        z.powi(self.0)
    }

    fn derivatives(&self, z: C64) -> Option<[C64; 3]> {
        let n = self.0 as f64;
        Some([
            n * z.powi(self.0 - 1),
            n * (n - 1.0) * z.powi(self.0 - 2),
            n * (n - 1.0) * (n - 2.0) * z.powi(self.0 - 3),
        ])
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Exp;

impl HolomorphicMap for Exp {
    fn value(&self, z: C64) -> C64 {
        z.exp()
    }

    fn derivatives(&self, z: C64) -> Option<[C64; 3]> {
        let e = z.exp();
        Some([e, e, e])
    }
}

/// Any closure, differentiated numerically.
pub struct Numeric<F>(pub F);

impl<F: Fn(C64) -> C64> HolomorphicMap for Numeric<F> {
    fn value(&self, z: C64) -> C64 {
        (self.0)(z)
    }
}

/// Fourth-order central differences with step `1e-4 max(1, |z|)`.
pub fn finite_difference_derivatives(f: &dyn HolomorphicMap, z: C64) -> [C64; 3] {
    let h = 1e-4 * z.norm().max(1.0);
    let at = |j: f64| f.value(z + C64::new(j * h, 0.0));
    let (m3, m2, m1, f0, p1, p2, p3) = (at(-3.0), at(-2.0), at(-1.0), at(0.0), at(1.0), at(2.0), at(3.0));
    let d1 = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
    let d2 = (-p2 + 16.0 * p1 - 30.0 * f0 + 16.0 * m1 - m2) / (12.0 * h * h);
    let d3 = (-p3 + 8.0 * p2 - 13.0 * p1 + 13.0 * m1 - 8.0 * m2 + m3) / (8.0 * h * h * h);
    [d1, d2, d3]
}

/// `S f = f'''/f' - (3/2) (f''/f')^2`.
pub fn schwarzian(f: &dyn HolomorphicMap, z: C64) -> Result<C64> {
    let [d1, d2, d3] = f.derivatives(z).unwrap_or_else(|| finite_difference_derivatives(f, z));
    if d1.norm() < 1e-10 {
        return Err(Error::CriticalPoint(d1.norm()));
    }
    let r = d2 / d1;
    Ok(d3 / d1 - 1.5 * r * r)
}

/// Residual of the best generalized-circle fit `A|w|^2 + Re(conj(B) w) + C = 0`
/// through finite chart points: smallest singular value of the design matrix
/// with unit-normalized rows.
pub fn circularity_residual(points: &[C64]) -> f64 {
    let rows: Vec<[f64; 4]> = points
        .iter()
        .map(|w| {
            let r = [w.norm_sqr(), w.re, w.im, 1.0];
            let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            r.map(|x| x / n)
        })
        .collect();
    let m = DMatrix::from_fn(rows.len(), 4, |i, j| rows[i][j]);
    let sv = m.singular_values();
    sv.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Project every sample through the chart, dropping failures.
pub fn chart_image(chart: &TangentChart, samples: &[FlagSample]) -> Vec<(f64, TangentChartPoint)> {
    samples
        .iter()
        .filter_map(|s| chart.project(s).ok().map(|p| (s.angle, p)))
        .collect()
}

/// Cayley map `w -> (w - i)/(w + i)` of the chart, sending the real line (the
/// Fuchsian image) to the unit circle and infinity to 1.
pub fn view_map(p: &TangentChartPoint) -> C64 {
    let i = C64::new(0.0, 1.0);
    let [num, den] = p.hom;
    let top = num - i * den;
    let bottom = num + i * den;
    if bottom.norm() == 0.0 {
        return C64::new(f64::INFINITY, 0.0);
    }
    top / bottom
}

#[derive(Clone, Debug, Serialize)]
pub struct ViewPoint {
    pub word: Word,
    pub angle: f64,
    pub x: f64,
    pub y: f64,
}

/// The limit set in the `k`-th tangent chart at the first usable sample,
/// normalized by [`normalization_words`] and drawn through [`view_map`].
/// Samples whose projection fails or lands on the pole of the view map are
/// dropped.
pub fn limit_set_view(rep: &LinearRep, rep0: &FuchsianRep, words: &[Word], k: usize) -> Result<Vec<ViewPoint>> {
    let dims = required_dims(rep.d, k);
    let set = sample_words(rep, rep0, words, words.len(), &dims);
    let base = set.samples.first().ok_or(Error::TooFewPoints { got: 0, need: 1 })?;
    let ns = normalization_samples(rep, rep0, &dims)?;
    let chart = TangentChart::new(base, [&ns[0], &ns[1], &ns[2]], k)?;
    Ok(set
        .samples
        .iter()
        .filter_map(|s| {
            let z = view_map(&chart.project(s).ok()?);
            z.is_finite().then(|| ViewPoint { word: s.word.clone(), angle: s.angle, x: z.re, y: z.im })
        })
        .collect())
}

/// Whether the cyclic order of the boundary parameters matches the cyclic
/// order of arguments around the origin after the view map, up to
/// orientation. Valid for curves separating `i` from `-i` in the chart.
pub fn cyclic_order_preserved(points: &[(f64, TangentChartPoint)]) -> bool {
    let n = points.len();
    if n < 3 {
        return false;
    }
    let mut by_param: Vec<usize> = (0..n).collect();
    by_param.sort_by(|&a, &b| points[a].0.total_cmp(&points[b].0));
    let args: Vec<f64> = points.iter().map(|(_, p)| view_map(p).arg()).collect();
    if args.iter().any(|a| !a.is_finite()) {
        return false;
    }
    let mut by_arg: Vec<usize> = (0..n).collect();
    by_arg.sort_by(|&a, &b| args[a].total_cmp(&args[b]));
    let mut rank = vec![0; n];
    for (r, &i) in by_param.iter().enumerate() {
        rank[i] = r;
    }
    let seq: Vec<usize> = by_arg.iter().map(|&i| rank[i]).collect();
    let forward = (0..n).all(|i| (seq[(i + 1) % n] + n - seq[i]) % n == 1);
    let backward = (0..n).all(|i| (seq[i] + n - seq[(i + 1) % n]) % n == 1);
    forward || backward
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::principal_angle;
    use crate::rep::{bend, irreducible};
    use crate::surface::{ball_words, fuchsian_reference};

    fn setup(d: usize) -> (FuchsianRep, LinearRep) {
        let rep0 = fuchsian_reference().unwrap();
        let rep = irreducible(&LinearRep::fuchsian(&rep0), d).unwrap();
        (rep0, rep)
    }

    fn words() -> Vec<Word> {
        ["a1 b2", "b1 A2 b2", "a2 a2 B1", "a1 a2 b1", "B2 A1 b1 b1", "a2 b2 A1 B2 a1"]
            .iter()
            .map(|s| Word::parse(s).unwrap())
            .collect()
    }

    #[test]
    fn fuchsian_flags_are_veronese() {
        for d in [3, 4, 5] {
            let (rep0, rep) = setup(d);
            for w in words() {
                let flag = limit_flag(&rep, &w, &(1..d).collect::<Vec<_>>()).unwrap();
                let angle = rep0.evaluate(&w).fixed_angles().0;
                let nu = veronese_flag(boundary_form(angle), d).unwrap();
                for k in 1..d {
                    let a = principal_angle(&flag.subspace(k), &nu.subspace(k));
                    assert!(a < 1e-7, "d={d} k={k} {w}: {a}");
                }
                assert!(flag.orthonormality_residual() < 1e-12);
            }
        }
    }

    #[test]
    fn flags_are_equivariant() {
        let (_, rep) = setup(4);
        let rep = bend(&rep, &Word::separating_curve(), C64::new(0.0, 0.3)).unwrap();
        // A long conjugator makes the conjugate badly non-normal, so keep it short.
        let g = Word::parse("b1").unwrap();
        for w in words() {
            let conj = g.concat(&w).concat(&g.inverse());
            let f1 = limit_flag(&rep, &conj, &[1, 2, 3]).unwrap();
            let f2 = limit_flag(&rep, &w, &[1, 2, 3]).unwrap().transform(&rep.evaluate(&g));
            for k in 1..4 {
                let a = principal_angle(&f1.subspace(k), &f2.subspace(k));
                assert!(a < 1e-6, "{w} k={k}: {a}");
            }
        }
    }

    #[test]
    fn power_has_same_flag() {
        let (_, rep) = setup(5);
        let w = Word::parse("a1 b2 B1").unwrap();
        let f1 = limit_flag(&rep, &w, &[1, 2, 3, 4]).unwrap();
        let f2 = limit_flag(&rep, &w.pow(2), &[1, 2, 3, 4]).unwrap();
        for k in 1..5 {
            assert!(principal_angle(&f1.subspace(k), &f2.subspace(k)) < 1e-7);
        }
    }

    #[test]
    fn veronese_tangent_example() {
        let x = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let y = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let t = veronese_tangent(x, y, 3, 1).unwrap();
        assert_eq!(t.as_slice(), &[C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        // The tangent line lies in nu^2(X) but not in nu^1(X).
        let nu = veronese_flag(x, 3).unwrap();
        let t = DMatrix::from_column_slice(3, 1, t.as_slice()).normalize();
        assert!(principal_angle(&t, &nu.subspace(2)) < 1e-12);
        assert!(principal_angle(&t, &nu.subspace(1)) > 1.0);
        assert!(matches!(veronese_tangent(x, x, 3, 1), Err(Error::DegenerateInput(_))));
        assert!(matches!(veronese_flag([C64::new(0.0, 0.0); 2], 3), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn veronese_tangent_divisible_by_exact_power() {
        let q = [C64::new(0.6, 0.1), C64::new(-0.3, 0.7)];
        let p = [C64::new(0.2, -0.5), C64::new(1.1, 0.4)];
        for d in 3..7 {
            for k in 1..d - 1 {
                let t = veronese_tangent(q, p, d, k).unwrap();
                let t = DMatrix::from_column_slice(d, 1, t.as_slice()).normalize();
                let nu = veronese_flag(q, d).unwrap();
                // Q^{d-1-k} divides it: in nu^{k+1}(Q); Q^{d-k} does not: not in nu^k(Q).
                assert!(principal_angle(&t, &nu.subspace(k + 1)) < 1e-10);
                assert!(principal_angle(&t, &nu.subspace(k)) > 1e-3);
            }
        }
    }

    #[test]
    fn chart_normalization_and_circle() {
        let (rep0, rep) = setup(3);
        let dims = required_dims(3, 1);
        let ns = normalization_samples(&rep, &rep0, &dims).unwrap();
        let pool = sample_words(&rep, &rep0, &ball_words(&rep0, 400), 200, &dims);
        let z = &pool.samples[7];
        let chart = TangentChart::new(z, [&ns[0], &ns[1], &ns[2]], 1).unwrap();
        assert_eq!(chart.project(&ns[0]).unwrap().coord, ChartCoord::Finite(C64::new(0.0, 0.0)));
        assert_eq!(chart.project(&ns[1]).unwrap().coord, ChartCoord::Finite(C64::new(1.0, 0.0)));
        assert_eq!(chart.project(&ns[2]).unwrap().coord, ChartCoord::Infinity);
        // Fuchsian chart image through 0, 1, infinity is the real line.
        let img = chart_image(&chart, &pool.samples);
        assert!(img.len() > 150);
        for (_, p) in &img {
            if let Some(w) = p.finite() {
                assert!(w.im.abs() < 1e-6 * (1.0 + w.norm()), "{w}");
            }
        }
        // Continuity at the base point.
        let at_z = chart.project(z).unwrap();
        let near = img
            .iter()
            .filter(|(a, _)| !same_point(*a, z.angle))
            .min_by(|a, b| {
                let da = (a.0 - z.angle).abs();
                let db = (b.0 - z.angle).abs();
                da.total_cmp(&db)
            })
            .unwrap();
        assert!(chordal(&at_z, &near.1) < 0.5);
    }

    #[test]
    fn chart_matches_veronese_tangent() {
        let (rep0, rep) = setup(4);
        let dims = required_dims(4, 2);
        let ns = normalization_samples(&rep, &rep0, &dims).unwrap();
        let pool = sample_words(&rep, &rep0, &words(), 10, &dims);
        let z = &pool.samples[0];
        let chart = TangentChart::new(z, [&ns[0], &ns[1], &ns[2]], 2).unwrap();
        let q = boundary_form(z.angle);
        for x in &pool.samples[1..] {
            let raw = chart.raw(x).unwrap();
            let t = veronese_tangent(q, boundary_form(x.angle), 4, 2).unwrap();
            let c = chart.quotient.adjoint() * t;
            assert!(chordal_hom(raw, [c[0], c[1]]) < 1e-7);
        }
    }

    #[test]
    fn hyperconvexity_of_veronese() {
        let (rep0, rep) = setup(3);
        let ws = ball_words(&rep0, 300);
        let r = hyperconvexity_probe(&rep, &rep0, &ws, 1, 30, 3, 5);
        assert_eq!(r.quadruples, 90);
        assert_eq!(r.failures, 0, "{r:?}");
        assert!(r.min_separation > 1e-7);
    }

    #[test]
    fn quasimobius_detects_distortion() {
        let pts: Vec<(f64, TangentChartPoint)> = (0..12)
            .map(|i| {
                let phi = 0.5 * i as f64;
                let w = C64::from_polar(1.0, phi);
                let m = Mobius { a: C64::new(2.0, 1.0), b: C64::new(0.5, 0.0), c: C64::new(0.0, 0.3), d: C64::new(1.0, -1.0) };
                let v = m.value(w);
                (phi, TangentChartPoint::from_hom(0.0, 1, v, C64::new(1.0, 0.0)))
            })
            .collect();
        let q = quasimobius_constant(&pts, 100_000, 1).unwrap();
        assert!((q.k_hat - 1.0).abs() < 1e-9, "{}", q.k_hat);
        let mut bent = pts.clone();
        let p = bent[3].1.finite().unwrap() * C64::new(1.0, 0.05);
        bent[3].1 = TangentChartPoint::from_hom(0.0, 1, p, C64::new(1.0, 0.0));
        assert!(quasimobius_constant(&bent, 100_000, 1).unwrap().k_hat > 1.001);
        assert!(matches!(quasimobius_constant(&pts[..5], 10, 1), Err(Error::TooFewPoints { got: 5, need: 8 })));
    }

    #[test]
    fn schwarzian_values() {
        let z = C64::new(0.3, -0.7);
        let m = Mobius { a: C64::new(1.0, 2.0), b: C64::new(0.0, 1.0), c: C64::new(3.0, 0.0), d: C64::new(1.0, 1.0) };
        assert!(schwarzian(&m, z).unwrap().norm() < 1e-12);
        let sq = schwarzian(&Power(2), C64::new(1.0, 0.0)).unwrap();
        assert!((sq - C64::new(-1.5, 0.0)).norm() < 1e-12);
        let num = schwarzian(&Numeric(|z: C64| z * z), C64::new(1.0, 0.0)).unwrap();
        // Roundoff in the third difference at this step is about 1e-4.
        assert!((num - C64::new(-1.5, 0.0)).norm() < 1e-3, "{num}");
        let e = schwarzian(&Exp, z).unwrap();
        assert!((e - C64::new(-0.5, 0.0)).norm() < 1e-12);
        assert!(matches!(schwarzian(&Power(2), C64::new(0.0, 0.0)), Err(Error::CriticalPoint(_))));
    }

    #[test]
    fn circle_fit() {
        let on: Vec<C64> = (0..20).map(|i| C64::new(1.0, 2.0) + C64::from_polar(3.0, i as f64)).collect();
        assert!(circularity_residual(&on) < 1e-12);
        let line: Vec<C64> = (0..20).map(|i| C64::new(i as f64, 0.5 * i as f64)).collect();
        assert!(circularity_residual(&line) < 1e-12);
        let off: Vec<C64> = (0..20).map(|i| C64::from_polar(1.0 + 0.2 * (3.0 * i as f64).sin(), i as f64)).collect();
        assert!(circularity_residual(&off) > 1e-3);
    }
}

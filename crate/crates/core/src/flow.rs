//! Geodesic flow on the unit tangent bundle of the genus-2 surface,
//! reparameterization by potentials, closed-orbit growth and the strip
//! area/packing estimates.
//!
//! A unit tangent vector is kept in Hopf coordinates: the backward and
//! forward endpoints of its geodesic (disk angles) and its footpoint, which
//! stays inside `F` in the Klein model. There geodesics are chords, so the
//! flow moves the footpoint along a chord by `m0 + a tanh(s) u`. Leaving `F`
//! through side `j` applies the inverse side pairing to the footpoint and
//! both endpoints.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::entropy::fit_counts;
use crate::error::{Error, Result};
use crate::surface::{
    half_plane_to_klein, klein_distance, klein_to_half_plane, octagon_inradius, side_normal, vector_angle,
    ClassCatalog, ConjClass, FuchsianRep, Letter, Mat2,
};

const MAX_CROSSINGS: usize = 1_000_000;

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn side_offset() -> f64 {
    octagon_inradius().tanh()
}

fn boundary_vector(phi: f64) -> [f64; 2] {
    let t = -0.5 * phi;
    [t.cos(), t.sin()]
}

fn act_on_angle(m: &Mat2, phi: f64) -> f64 {
    let v = boundary_vector(phi);
    vector_angle([m.a * v[0] + m.b * v[1], m.c * v[0] + m.d * v[1]])
}

fn angle_diff(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Whether a Klein point lies in `F`, up to `slack`.
pub fn in_fundamental_domain(k: [f64; 2], slack: f64) -> bool {
    let c = side_offset();
    (0..8).all(|j| dot(side_normal(j), k) <= c + slack)
}

/// The chord from `back` to `fwd`, parameterized by hyperbolic arc length
/// from its Euclidean midpoint.
#[derive(Clone, Copy, Debug)]
struct Chord {
    m0: [f64; 2],
    u: [f64; 2],
    a: f64,
}

impl Chord {
    fn new(back: f64, fwd: f64) -> Chord {
        let p = [back.cos(), back.sin()];
        let q = [fwd.cos(), fwd.sin()];
        let diff = [q[0] - p[0], q[1] - p[1]];
        let len = diff[0].hypot(diff[1]);
        Chord {
            m0: [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])],
            u: [diff[0] / len, diff[1] / len],
            a: 0.5 * len,
        }
    }

    fn tau(&self, k: [f64; 2]) -> f64 {
        dot([k[0] - self.m0[0], k[1] - self.m0[1]], self.u)
    }

    fn sigma(&self, k: [f64; 2]) -> f64 {
        (self.tau(k) / self.a).clamp(-1.0 + 1e-16, 1.0 - 1e-16).atanh()
    }

    fn at_tau(&self, tau: f64) -> [f64; 2] {
        [self.m0[0] + tau * self.u[0], self.m0[1] + tau * self.u[1]]
    }

    fn point(&self, sigma: f64) -> [f64; 2] {
        self.at_tau(self.a * sigma.tanh())
    }
}

/// Unit tangent vector of the quotient in Hopf coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UnitTangent {
    /// Footpoint in the Klein model, inside `F`.
    pub foot: [f64; 2],
    /// Backward endpoint of the geodesic, as a disk angle.
    pub back: f64,
    /// Forward endpoint of the geodesic, as a disk angle.
    pub fwd: f64,
}

impl UnitTangent {
    /// Vector at a Klein point of `F` pointing in Euclidean direction `theta`.
    pub fn from_direction(foot: [f64; 2], theta: f64) -> UnitTangent {
        let u = [theta.cos(), theta.sin()];
        // |foot + s u| = 1
        let b = dot(foot, u);
        let c = dot(foot, foot) - 1.0;
        let disc = (b * b - c).max(0.0).sqrt();
        let s_fwd = -b + disc;
        let s_back = -b - disc;
        let angle = |s: f64| (foot[1] + s * u[1]).atan2(foot[0] + s * u[0]).rem_euclid(2.0 * PI);
        UnitTangent { foot, back: angle(s_back), fwd: angle(s_fwd) }
    }

    /// The vector at upper half-plane point `z` on the geodesic from `back` to
    /// `fwd`, reduced into `F`.
    pub fn reduced(rep: &FuchsianRep, z: num_complex::Complex64, back: f64, fwd: f64) -> UnitTangent {
        let (h, z) = crate::surface::reduce_point(rep, z);
        UnitTangent {
            foot: half_plane_to_klein(z),
            back: act_on_angle(&h, back),
            fwd: act_on_angle(&h, fwd),
        }
    }

    fn transformed(&self, m: &Mat2, foot: [f64; 2]) -> UnitTangent {
        UnitTangent {
            foot: half_plane_to_klein(m.apply(klein_to_half_plane(foot))),
            back: act_on_angle(m, self.back),
            fwd: act_on_angle(m, self.fwd),
        }
    }

    /// Largest of the footpoint distance (Euclidean, Klein model) and the
    /// two endpoint angle differences.
    pub fn separation(&self, other: &UnitTangent) -> f64 {
        let df = (self.foot[0] - other.foot[0]).hypot(self.foot[1] - other.foot[1]);
        df.max(angle_diff(self.back, other.back)).max(angle_diff(self.fwd, other.fwd))
    }

    /// [`separation`](Self::separation) in the quotient: the smallest
    /// separation from `other` over images of `self` under elements of word
    /// length at most 4 that keep the footpoint in `F`. Vectors on the
    /// boundary of `F` have several representatives; at a vertex the eight
    /// copies of `F` around it are reached by words of length up to 4.
    pub fn quotient_separation(&self, rep: &FuchsianRep, other: &UnitTangent) -> f64 {
        let mut best = self.separation(other);
        if in_fundamental_domain(self.foot, -1e-7) {
            return best;
        }
        for g in vertex_star(rep) {
            let w = self.transformed(&g, self.foot);
            if in_fundamental_domain(w.foot, 1e-7) {
                best = best.min(w.separation(other));
            }
        }
        best
    }

    /// Hyperbolic distance of the footpoint to `i`, which is its distance to
    /// the orbit of `i` since `F` is the Dirichlet domain of `i`.
    pub fn distance_to_center(&self) -> f64 {
        klein_distance(self.foot, [0.0, 0.0])
    }

    /// Image under the time-`t` geodesic flow.
    pub fn flow(&self, rep: &FuchsianRep, t: f64) -> Result<UnitTangent> {
        Ok(trace(rep, self, t)?.1)
    }
}

/// Part of a flow line inside one copy of `F`, with arc-length parameter
/// range `[s0, s1]` on its chord.
#[derive(Clone, Copy, Debug)]
struct Piece {
    back: f64,
    fwd: f64,
    chord: Chord,
    s0: f64,
    s1: f64,
}

impl Piece {
    fn len(&self) -> f64 {
        self.s1 - self.s0
    }

    fn state(&self, sigma: f64) -> UnitTangent {
        UnitTangent { foot: self.chord.point(sigma), back: self.back, fwd: self.fwd }
    }
}

/// Flow `v` for time `t >= 0`, returning the pieces crossed and the endpoint.
fn trace(rep: &FuchsianRep, v: &UnitTangent, t: f64) -> Result<(Vec<Piece>, UnitTangent)> {
    trace_axis(rep, v, t, None)
}

/// [`trace`] along the axis of `axis`, whose repelling and attracting fixed
/// points must be the endpoints of `v`. After each side crossing the chord is
/// read off the conjugated element instead of the transported endpoints, so
/// rounding does not grow along the orbit.
fn trace_axis(rep: &FuchsianRep, v: &UnitTangent, t: f64, axis: Option<Mat2>) -> Result<(Vec<Piece>, UnitTangent)> {
    let c = side_offset();
    let mut cur = *v;
    let mut axis = axis;
    let mut left = t;
    let mut pieces = Vec::new();
    for _ in 0..MAX_CROSSINGS {
        let chord = Chord::new(cur.back, cur.fwd);
        let s_cur = chord.sigma(cur.foot);
        let mut exit = (f64::INFINITY, 0);
        for j in 0..8 {
            let n = side_normal(j);
            let nu = dot(n, chord.u);
            if nu > 1e-15 {
                let tau = (c - dot(n, chord.m0)) / nu;
                if tau < exit.0 {
                    exit = (tau, j);
                }
            }
        }
        let s_exit = if exit.0 >= chord.a { f64::INFINITY } else { (exit.0 / chord.a).atanh().max(s_cur) };
        let piece = |s1: f64| Piece { back: cur.back, fwd: cur.fwd, chord, s0: s_cur, s1 };
        if s_exit - s_cur >= left {
            let end = s_cur + left;
            if left > 0.0 {
                pieces.push(piece(end));
            }
            return Ok((pieces, UnitTangent { foot: chord.point(end), ..cur }));
        }
        if s_exit > s_cur {
            pieces.push(piece(s_exit));
            left -= s_exit - s_cur;
        }
        let step = rep.neighbour(exit.1).inv();
        cur = cur.transformed(&step, chord.at_tau(exit.0.max(chord.tau(cur.foot))));
        if let Some(g) = axis.as_mut() {
            *g = step.mul(g).mul(&step.inv());
            let (fwd, back) = g.fixed_angles();
            cur.back = back;
            cur.fwd = fwd;
        }
    }
    Err(Error::BudgetExceeded(format!("flow crossed more than {MAX_CROSSINGS} sides")))
}

// ----- Quadrature -----

const MAX_PANELS: usize = 1 << 22;

/// Composite Simpson with doubling panel counts until successive estimates
/// differ by at most `tol`. Returns the estimate and the panel count.
pub fn simpson_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> (f64, usize) {
    if b <= a {
        return (0.0, 0);
    }
    let mut n = 1usize;
    let mut h = b - a;
    let mut trap = 0.5 * h * (f(a) + f(b));
    let mut prev: Option<f64> = None;
    loop {
        let mid: f64 = (0..n).map(|k| f(a + (k as f64 + 0.5) * h)).sum();
        let trap2 = 0.5 * trap + 0.5 * h * mid;
        let s = (4.0 * trap2 - trap) / 3.0;
        n *= 2;
        h *= 0.5;
        trap = trap2;
        if let Some(p) = prev {
            if (s - p).abs() <= tol || n >= MAX_PANELS {
                return (s, n);
            }
        }
        prev = Some(s);
    }
}

/// Composite Simpson with `n` (even) panels.
pub fn simpson_fixed<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n.max(2) + n % 2;
    let h = (b - a) / n as f64;
    let inner: f64 = (1..n).map(|k| f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 }).sum();
    h / 3.0 * (f(a) + inner + f(b))
}

// ----- Potentials -----

/// A positive continuous function on the unit tangent bundle.
pub trait Potential: Send + Sync {
    fn name(&self) -> String;
    fn value(&self, v: &UnitTangent) -> f64;
    /// `(r_min, r_max)` with `r_min <= value <= r_max` everywhere.
    fn bounds(&self) -> (f64, f64);
}

#[derive(Clone, Copy, Debug)]
pub struct Constant(f64);

impl Constant {
    pub fn new(c: f64) -> Result<Constant> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::Config(format!("constant potential must be positive, got {c}")));
        }
        Ok(Constant(c))
    }
}

impl Potential for Constant {
    fn name(&self) -> String {
        format!("const:{}", self.0)
    }

    fn value(&self, _: &UnitTangent) -> f64 {
        self.0
    }

    fn bounds(&self) -> (f64, f64) {
        (self.0, self.0)
    }
}

/// `1 + amplitude * B(x) / B(i)` with `B(x) = sum exp(-(d(x, g i) / width)^2)`
/// over group elements `g` of word length at most 2, `x` the footpoint.
#[derive(Clone, Debug)]
pub struct Bump {
    pub amplitude: f64,
    pub width: f64,
    centers: Vec<[f64; 3]>,
    /// Centers with `cosh d` beyond this contribute below `1e-16`.
    cosh_cutoff: f64,
    norm: f64,
    r_max: f64,
    /// Largest relative contribution, over the validation net, of the
    /// length-3 shell left out of the sum.
    pub truncation: f64,
}

pub const NET_POINTS: usize = 10_000;
const NET_SEED: u64 = 0x6e6574;

/// Group elements of word length at most 4, which include every element
/// moving some point of `F` to another point of `F`.
fn vertex_star(rep: &FuchsianRep) -> Vec<Mat2> {
    word_shells(rep, 4).concat()
}

fn word_shells(rep: &FuchsianRep, max_len: usize) -> Vec<Vec<Mat2>> {
    let mut shells = vec![vec![(Mat2::IDENTITY, None::<Letter>)]];
    for _ in 0..max_len {
        let last = shells.last().unwrap();
        let mut next = Vec::new();
        for (g, l0) in last {
            for l in Letter::ALL {
                if *l0 == Some(l.inverse()) {
                    continue;
                }
                next.push((g.mul(&rep.gen(l)), Some(l)));
            }
        }
        shells.push(next);
    }
    shells.into_iter().map(|s| s.into_iter().map(|(g, _)| g).collect()).collect()
}

/// Hyperboloid model point of a Klein point.
fn hyperboloid(k: [f64; 2]) -> [f64; 3] {
    let s = 1.0 / (1.0 - k[0] * k[0] - k[1] * k[1]).max(1e-300).sqrt();
    [s, s * k[0], s * k[1]]
}

fn cosh_distance(x: &[f64; 3], y: &[f64; 3]) -> f64 {
    (x[0] * y[0] - x[1] * y[1] - x[2] * y[2]).max(1.0)
}

fn orbit_points(rep: &FuchsianRep, max_len: usize) -> Vec<Vec<[f64; 3]>> {
    let i = num_complex::Complex64::new(0.0, 1.0);
    word_shells(rep, max_len)
        .into_iter()
        .map(|s| s.into_iter().map(|g| hyperboloid(half_plane_to_klein(g.apply(i)))).collect())
        .collect()
}

impl Bump {
    pub fn new(rep: &FuchsianRep, amplitude: f64, width: f64) -> Result<Bump> {
        if !(amplitude.is_finite() && amplitude >= 0.0 && width.is_finite() && width > 0.0) {
            return Err(Error::Config(format!("bump needs amp >= 0 and width > 0, got {amplitude}, {width}")));
        }
        let shells = orbit_points(rep, 3);
        let centers: Vec<[f64; 3]> = shells[..3].concat();
        let mut bump = Bump {
            amplitude,
            width,
            centers,
            cosh_cutoff: (6.1 * width).cosh(),
            norm: 1.0,
            r_max: 1.0 + amplitude,
            truncation: 0.0,
        };
        bump.norm = bump.raw([0.0, 0.0]);
        let net = potential_net(NET_POINTS, NET_SEED);
        let kernel = |k: [f64; 2], c: &[f64; 3]| {
            let d = cosh_distance(&hyperboloid(k), c).acosh();
            (-(d / width).powi(2)).exp()
        };
        let mut ratio: f64 = 1.0;
        let mut truncation: f64 = 0.0;
        for v in &net {
            ratio = ratio.max(bump.raw(v.foot) / bump.norm);
            let shell: f64 = shells[3].iter().map(|c| kernel(v.foot, c)).sum();
            truncation = truncation.max(shell / bump.norm);
        }
        bump.r_max = 1.0 + amplitude * ratio;
        bump.truncation = amplitude * truncation;
        validate_potential(&bump, &net)?;
        Ok(bump)
    }

    fn raw(&self, k: [f64; 2]) -> f64 {
        let x = hyperboloid(k);
        self.centers
            .iter()
            .map(|c| cosh_distance(&x, c))
            .filter(|&ch| ch < self.cosh_cutoff)
            .map(|ch| (-(ch.acosh() / self.width).powi(2)).exp())
            .sum()
    }
}

impl Potential for Bump {
    fn name(&self) -> String {
        format!("bump:amp={},width={}", self.amplitude, self.width)
    }

    fn value(&self, v: &UnitTangent) -> f64 {
        1.0 + self.amplitude * self.raw(v.foot) / self.norm
    }

    fn bounds(&self) -> (f64, f64) {
        (1.0, self.r_max)
    }
}

/// Support radius of the transfer function, below the inradius of `F`.
pub const TRANSFER_RADIUS: f64 = 1.4;

/// `beta(x, T) / T` for the cocycle
/// `beta(x, t) = kappa_base(x, t) + G(phi_t x) - G(x)`, where
/// `G(x) = transfer * psi(d(x, i))` and `psi` is a smooth bump supported in
/// `[0, TRANSFER_RADIUS)`. Since `F` is the Dirichlet domain of `i`, `G` is a
/// smooth invariant function. The periods of this potential equal those of
/// `base`.
pub struct Cohomologous<P: Potential> {
    pub base: P,
    pub transfer: f64,
    pub horizon: f64,
    rep: FuchsianRep,
}

impl<P: Potential> Cohomologous<P> {
    pub fn new(rep: &FuchsianRep, base: P, transfer: f64, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) || base.bounds().0 - transfer.abs() / horizon <= 0.0 {
            return Err(Error::Config(format!(
                "averaging horizon {horizon} too short for transfer amplitude {transfer}"
            )));
        }
        Ok(Cohomologous { base, transfer, horizon, rep: rep.clone() })
    }

    pub fn transfer_function(&self, v: &UnitTangent) -> f64 {
        let x = v.distance_to_center() / TRANSFER_RADIUS;
        if x >= 1.0 {
            0.0
        } else {
            self.transfer * (1.0 - 1.0 / (1.0 - x * x)).exp()
        }
    }

    /// The cocycle `beta(v, t)`.
    pub fn beta(&self, v: &UnitTangent, t: f64) -> Result<f64> {
        let (pieces, end) = trace(&self.rep, v, t)?;
        let k: f64 = pieces.iter().map(|p| integrate_piece(&self.base, p, p.s0, p.s1).0).sum();
        Ok(k + self.transfer_function(&end) - self.transfer_function(v))
    }

    /// `beta` along a periodic orbit, from its start point.
    pub fn beta_on_orbit(&self, orbit: &PeriodicOrbit, t: f64) -> f64 {
        kappa(&self.base, orbit, t) + self.transfer_function(&orbit.state(t)) - self.transfer_function(&orbit.state(0.0))
    }
}

impl<P: Potential> Potential for Cohomologous<P> {
    fn name(&self) -> String {
        format!("cohomologous({},T={})", self.base.name(), self.horizon)
    }

    fn value(&self, v: &UnitTangent) -> f64 {
        self.beta(v, self.horizon).expect("short flow segment") / self.horizon
    }

    fn bounds(&self) -> (f64, f64) {
        let (lo, hi) = self.base.bounds();
        let slack = self.transfer.abs() / self.horizon;
        (lo - slack, hi + slack)
    }
}

/// Seeded unit tangent vectors with footpoints uniform (in Klein
/// coordinates) over `F`.
pub fn potential_net(count: usize, seed: u64) -> Vec<UnitTangent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radius = side_offset() / (PI / 8.0).cos();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let k = [rng.random_range(-radius..radius), rng.random_range(-radius..radius)];
        if in_fundamental_domain(k, 0.0) {
            out.push(UnitTangent::from_direction(k, rng.random_range(0.0..2.0 * PI)));
        }
    }
    out
}

/// Check `0 < r_min <= r(v) <= r_max` on the net; returns the observed range.
pub fn validate_potential<P: Potential + ?Sized>(r: &P, net: &[UnitTangent]) -> Result<(f64, f64)> {
    let (lo, hi) = r.bounds();
    if !(lo > 0.0 && lo <= hi) {
        return Err(Error::ConstructionFailure(format!("potential bounds {lo}..{hi} are not positive")));
    }
    let mut seen = (f64::INFINITY, f64::NEG_INFINITY);
    for v in net {
        let x = r.value(v);
        if !(x >= lo * (1.0 - 1e-12) && x <= hi * (1.0 + 1e-12)) {
            return Err(Error::ConstructionFailure(format!("{} = {x} outside [{lo}, {hi}]", r.name())));
        }
        seen = (seen.0.min(x), seen.1.max(x));
    }
    Ok(seen)
}

/// Parse `const:<c>` or `bump:amp=<a>,width=<w>`.
pub fn parse_potential(rep: &FuchsianRep, spec: &str) -> Result<Box<dyn Potential>> {
    let bad = || Error::Config(format!("bad potential '{spec}'"));
    let (kind, args) = spec.split_once(':').ok_or_else(bad)?;
    match kind.trim() {
        "const" => Ok(Box::new(Constant::new(args.trim().parse().map_err(|_| bad())?)?)),
        "bump" => {
            let (mut amp, mut width) = (0.5, 1.0);
            for kv in args.split(',').filter(|s| !s.trim().is_empty()) {
                let (k, v) = kv.split_once('=').ok_or_else(bad)?;
                let v: f64 = v.trim().parse().map_err(|_| bad())?;
                match k.trim() {
                    "amp" => amp = v,
                    "width" => width = v,
                    _ => return Err(bad()),
                }
            }
            Ok(Box::new(Bump::new(rep, amp, width)?))
        }
        _ => Err(bad()),
    }
}

// ----- Periodic orbits -----

/// Closed orbit of the geodesic flow in the class `cls`, sampled by arc
/// length from a start point.
#[derive(Clone, Debug)]
pub struct PeriodicOrbit {
    pub cls: ConjClass,
    pub period: f64,
    /// Offset of the start point along the orbit.
    pub start: f64,
    /// Distance between the start point and its image after one period.
    pub closure_residual: f64,
    pieces: Arc<Vec<Piece>>,
    ends: Arc<Vec<f64>>,
}

impl PeriodicOrbit {
    pub fn new(rep: &FuchsianRep, cls: &ConjClass) -> Result<PeriodicOrbit> {
        let (plus, minus) = cls.angles();
        let gamma = rep.evaluate(&cls.rep_word);
        let (gp, gm) = gamma.fixed_angles();
        if angle_diff(gp, plus).max(angle_diff(gm, minus)) > 1e-6 {
            return Err(Error::ConstructionFailure(format!(
                "representative {} does not have the class axis",
                cls.rep_word
            )));
        }
        let chord = Chord::new(minus, plus);
        let (h, z) = crate::surface::reduce_point(rep, klein_to_half_plane(chord.m0));
        let g = h.mul(&gamma).mul(&h.inv());
        let (fwd, back) = g.fixed_angles();
        let v0 = UnitTangent { foot: half_plane_to_klein(z), back, fwd };
        let (pieces, end) = trace_axis(rep, &v0, cls.length, Some(g))?;
        let closure_residual = end.quotient_separation(rep, &v0);
        if closure_residual > 1e-7 {
            return Err(Error::ConstructionFailure(format!(
                "orbit of {} does not close: residual {closure_residual:e}",
                cls.rep_word
            )));
        }
        let mut ends = Vec::with_capacity(pieces.len());
        let mut acc = 0.0;
        for p in &pieces {
            acc += p.len();
            ends.push(acc);
        }
        Ok(PeriodicOrbit {
            cls: cls.clone(),
            period: cls.length,
            start: 0.0,
            closure_residual,
            pieces: Arc::new(pieces),
            ends: Arc::new(ends),
        })
    }

    /// Number of copies of `F` crossed in one period.
    pub fn crossings(&self) -> usize {
        self.pieces.len()
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let local = s.rem_euclid(self.period);
        let i = self.ends.partition_point(|&e| e <= local).min(self.pieces.len() - 1);
        let begin = if i == 0 { 0.0 } else { self.ends[i - 1] };
        (i, (local - begin).clamp(0.0, self.pieces[i].len()))
    }

    /// `phi_s` of the start point.
    pub fn state(&self, s: f64) -> UnitTangent {
        let (i, off) = self.locate(self.start + s);
        let p = &self.pieces[i];
        p.state(p.s0 + off)
    }

    /// The start point itself, as a free vector.
    pub fn start_vector(&self) -> UnitTangent {
        self.state(0.0)
    }

    /// Same orbit started at `phi_s` of the current start.
    pub fn shifted(&self, s: f64) -> PeriodicOrbit {
        PeriodicOrbit { start: (self.start + s).rem_euclid(self.period), ..self.clone() }
    }

    /// Pieces of `[start + from, start + from + len]` as `(piece, s_a, s_b)`.
    fn segments(&self, from: f64, len: f64) -> Vec<(usize, f64, f64)> {
        let (mut i, mut off) = self.locate(self.start + from);
        let mut remaining = len;
        let mut out = Vec::new();
        let n = self.pieces.len();
        while remaining > 0.0 {
            let p = &self.pieces[i];
            let take = (p.len() - off).min(remaining).max(0.0);
            if take > 0.0 {
                out.push((i, p.s0 + off, p.s0 + off + take));
            }
            remaining -= take;
            off = 0.0;
            i = (i + 1) % n;
        }
        out
    }
}

/// Successive Simpson estimates on a piece must agree to this times its
/// length.
const KAPPA_TOL: f64 = 1e-9;

fn integrate_piece<P: Potential + ?Sized>(r: &P, p: &Piece, a: f64, b: f64) -> (f64, usize) {
    let tol = KAPPA_TOL * (b - a);
    simpson_adaptive(|s| r.value(&p.state(s)), a, b, tol)
}

/// `kappa_r(x, t)`: the integral of `r` along the orbit from its start
/// point for time `t >= 0`.
pub fn kappa<P: Potential + ?Sized>(r: &P, orbit: &PeriodicOrbit, t: f64) -> f64 {
    assert!(t >= 0.0, "kappa needs t >= 0");
    orbit
        .segments(0.0, t)
        .into_iter()
        .map(|(i, a, b)| integrate_piece(r, &orbit.pieces[i], a, b).0)
        .sum()
}

/// [`kappa`] recomputed with `factor` times the panels the adaptive rule
/// settled on, piece by piece.
pub fn kappa_refined<P: Potential + ?Sized>(r: &P, orbit: &PeriodicOrbit, t: f64, factor: usize) -> f64 {
    orbit
        .segments(0.0, t)
        .into_iter()
        .map(|(i, a, b)| {
            let p = &orbit.pieces[i];
            let (_, n) = integrate_piece(r, p, a, b);
            simpson_fixed(|s| r.value(&p.state(s)), a, b, factor * n.max(2))
        })
        .sum()
}

/// Integral of `r` along the flow line of an arbitrary vector.
pub fn kappa_from<P: Potential + ?Sized>(rep: &FuchsianRep, r: &P, v: &UnitTangent, t: f64) -> Result<f64> {
    let (pieces, _) = trace(rep, v, t)?;
    Ok(pieces.iter().map(|p| integrate_piece(r, p, p.s0, p.s1).0).sum())
}

fn alpha_bracket<P: Potential + ?Sized>(r: &P, t: f64) -> (f64, f64) {
    let (lo, hi) = r.bounds();
    (t / hi, t / lo)
}

/// `alpha_r(x, t)`: the time `s` with `kappa_r(x, s) = t`, by Newton steps
/// safeguarded by bisection.
pub fn alpha_inverse<P: Potential + ?Sized>(r: &P, orbit: &PeriodicOrbit, t: f64) -> f64 {
    assert!(t >= 0.0, "alpha_inverse needs t >= 0");
    if t == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = alpha_bracket(r, t);
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = kappa(r, orbit, s) - t;
        if f.abs() <= 1e-12 * t.max(1.0) {
            break;
        }
        if f < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let next = s - f / r.value(&orbit.state(s));
        s = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-14 * t.max(1.0) {
            break;
        }
    }
    s
}

/// [`alpha_inverse`] by plain bisection.
pub fn alpha_inverse_bisection<P: Potential + ?Sized>(r: &P, orbit: &PeriodicOrbit, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = alpha_bracket(r, t);
    while hi - lo > 1e-13 * t.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if kappa(r, orbit, mid) < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// ----- Orbit growth -----

#[derive(Clone, Debug, Serialize)]
pub struct GrowthFit {
    pub potential: String,
    pub radii: Vec<f64>,
    pub counts: Vec<u64>,
    pub slope: f64,
    pub slope_stderr: f64,
    pub window: (f64, f64),
    /// Orbits enumerated up to this geodesic length.
    pub enumerated_length: f64,
    /// `[1/r_max, 1/r_min]`, the range allowed by the variational formula
    /// when the geodesic flow has entropy one.
    pub bracket: (f64, f64),
    /// Orbits that could not be built.
    pub skipped: usize,
    pub primitive_only: bool,
}

/// Geodesic lengths beyond this make the class enumeration too slow.
pub const MAX_GROWTH_LENGTH: f64 = 13.0;

/// Growth rate of `#{primitive orbits : kappa_r(x, period) <= R}` fitted on
/// `window`, `R <= r_max_radius`.
pub fn orbital_growth<P: Potential + ?Sized>(
    rep: &FuchsianRep,
    r: &P,
    radius: f64,
    window: (f64, f64),
) -> Result<GrowthFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo && hi <= radius + 1e-12) {
        return Err(Error::Config(format!("window {lo}:{hi} must satisfy 0 < lo < hi <= rmax = {radius}")));
    }
    let (r_min, r_max) = r.bounds();
    // kappa >= r_min * length, so longer orbits never count.
    let reach = radius / r_min;
    if reach > MAX_GROWTH_LENGTH {
        return Err(Error::BudgetExceeded(format!(
            "orbits up to length {reach:.2} needed, limit {MAX_GROWTH_LENGTH}"
        )));
    }
    let cat = ClassCatalog::enumerate(rep, reach)?;
    let periods: Vec<Option<f64>> = cat
        .classes
        .par_iter()
        .map(|c| PeriodicOrbit::new(rep, c).ok().map(|o| kappa(r, &o, o.period)))
        .collect();
    let skipped = periods.iter().filter(|p| p.is_none()).count();
    let values: Vec<f64> = periods.into_iter().flatten().collect();
    let (radii, counts, slope, slope_stderr) = fit_counts(&values, window)?;
    Ok(GrowthFit {
        potential: r.name(),
        radii,
        counts,
        slope,
        slope_stderr,
        window,
        enumerated_length: reach,
        bracket: (1.0 / r_max, 1.0 / r_min),
        skipped,
        primitive_only: true,
    })
}

// ----- Strip area and packings -----

/// Hyperbolic area of `[0, 1] x [e^-t, 2 e^-t]` by nested quadrature of
/// `dx dy / y^2`.
pub fn box_area_growth(t: f64) -> f64 {
    let lo = (-t).exp();
    let scale = 0.5 * t.exp();
    let inner = |_x: f64| simpson_adaptive(|y| 1.0 / (y * y), lo, 2.0 * lo, 1e-14 * scale).0;
    simpson_adaptive(inner, 0.0, 1.0, 1e-14 * scale).0
}

/// `e^t / (2 C^2 pi sinh(delta))`.
pub fn packing_lower_bound(t: f64, delta: f64, c: f64) -> f64 {
    t.exp() / (2.0 * c * c * PI * delta.sinh())
}

/// Size of a greedy `delta`-separated set in the strip
/// `[0, 1] x [e^-t, 2 e^-t]`, scanning a grid of spacing `delta / 4`.
///
/// The strip is first rescaled by `e^t`, an isometry onto
/// `[0, e^t] x [1, 2]`.
pub fn greedy_packing(t: f64, delta: f64) -> usize {
    let width = t.exp();
    let step = delta / 4.0;
    // d(p, q) < delta forces |p - q| < cell when both heights are in [1, 2].
    let cell = (8.0 * (delta.cosh() - 1.0)).sqrt();
    let nx = (width / step).floor() as usize + 1;
    let ny = (1.0 / step).floor() as usize + 1;
    let gx = (width / cell).ceil() as usize + 1;
    let gy = (1.0 / cell).ceil() as usize + 1;
    let mut grid: Vec<Vec<[f64; 2]>> = vec![Vec::new(); gx * gy];
    let cosh_delta = delta.cosh();
    let mut count = 0;
    for ix in 0..nx {
        let x = (ix as f64 * step).min(width);
        for iy in 0..ny {
            let y = (1.0 + iy as f64 * step).min(2.0);
            let (cx, cy) = ((x / cell) as usize, ((y - 1.0) / cell) as usize);
            let mut ok = true;
            'scan: for ax in cx.saturating_sub(1)..=(cx + 1).min(gx - 1) {
                for ay in cy.saturating_sub(1)..=(cy + 1).min(gy - 1) {
                    for q in &grid[ax * gy + ay] {
                        let d2 = (x - q[0]).powi(2) + (y - q[1]).powi(2);
                        if 1.0 + d2 / (2.0 * y * q[1]) < cosh_delta {
                            ok = false;
                            break 'scan;
                        }
                    }
                }
            }
            if ok {
                grid[cx * gy + cy].push([x, y]);
                count += 1;
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::fuchsian_reference;

    #[test]
    fn simpson_is_exact_on_cubics() {
        let (v, _) = simpson_adaptive(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 1e-14);
        assert!((v - 2.0).abs() < 1e-13);
        assert!((simpson_fixed(|x| x * x, 0.0, 3.0, 2) - 9.0).abs() < 1e-13);
    }

    #[test]
    fn chord_parameter_is_arc_length() {
        let ch = Chord::new(2.0, 0.3);
        let p = ch.point(0.4);
        let q = ch.point(1.1);
        assert!((klein_distance(p, q) - 0.7).abs() < 1e-12);
    }

    #[test]
    fn from_direction_lies_on_chord() {
        let v = UnitTangent::from_direction([0.2, -0.1], 1.0);
        let ch = Chord::new(v.back, v.fwd);
        assert!((ch.at_tau(ch.tau(v.foot))[0] - v.foot[0]).abs() < 1e-14);
        assert!(ch.u[0] * 1f64.cos() + ch.u[1] * 1f64.sin() > 0.999_999);
    }

    #[test]
    fn flow_is_a_group_action() {
        let rep = fuchsian_reference().unwrap();
        let v = UnitTangent::from_direction([0.1, 0.3], 0.7);
        let a = v.flow(&rep, 2.5).unwrap();
        let b = v.flow(&rep, 1.0).unwrap().flow(&rep, 1.5).unwrap();
        assert!(a.separation(&b) < 1e-11);
        assert!(in_fundamental_domain(a.foot, 1e-12));
    }

    #[test]
    fn area_and_packing_values() {
        assert!((box_area_growth(0.0) - 0.5).abs() < 1e-12);
        let t = 2.0;
        let n = greedy_packing(t, 0.3);
        assert!(n as f64 >= packing_lower_bound(t, 0.3, 1.0));
    }
}

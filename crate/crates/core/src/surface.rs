//! Genus-2 surface group: words, the regular-octagon Fuchsian group and
//! enumeration of primitive conjugacy classes by translation length.
//!
//! Group elements act on the upper half-plane as real 2x2 matrices. The
//! fundamental domain `F` is the regular octagon with vertex angle pi/4,
//! centered at `i` (the origin of the disk model), and is the Dirichlet
//! domain of that point.

use std::collections::{HashMap, HashSet};
use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generator letter. `0..4` are `a1 b1 a2 b2`, `4..8` their inverses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter(u8);

pub const A1: Letter = Letter(0);
pub const B1: Letter = Letter(1);
pub const A2: Letter = Letter(2);
pub const B2: Letter = Letter(3);

const NAMES: [&str; 8] = ["a1", "b1", "a2", "b2", "A1", "B1", "A2", "B2"];

impl Letter {
    pub const ALL: [Letter; 8] = [
        Letter(0),
        Letter(1),
        Letter(2),
        Letter(3),
        Letter(4),
        Letter(5),
        Letter(6),
        Letter(7),
    ];

    pub fn new(index: u8) -> Letter {
        assert!(index < 8);
        Letter(index)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn inverse(self) -> Letter {
        Letter((self.0 + 4) % 8)
    }

    /// Index of the generator (0..4) ignoring orientation.
    pub fn generator(self) -> usize {
        (self.0 % 4) as usize
    }

    pub fn is_inverse(self) -> bool {
        self.0 >= 4
    }

    pub fn name(self) -> &'static str {
        NAMES[self.index()]
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Letter {
    type Err = Error;
    fn from_str(s: &str) -> Result<Letter> {
        NAMES
            .iter()
            .position(|n| *n == s)
            .map(|i| Letter(i as u8))
            .ok_or_else(|| Error::InvalidWord(format!("unknown letter {s:?}")))
    }
}

/// A word in the generators. Not necessarily reduced; see [`Word::reduce`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn empty() -> Word {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    /// Parse whitespace-separated letters, e.g. `"a1 B2 a1"`.
    pub fn parse(s: &str) -> Result<Word> {
        s.split_whitespace().map(Letter::from_str).collect::<Result<Vec<_>>>().map(Word)
    }

    /// The defining relator `a1 b1 A1 B1 a2 b2 A2 B2`.
    pub fn relator() -> Word {
        Word(vec![A1, B1, A1.inverse(), B1.inverse(), A2, B2, A2.inverse(), B2.inverse()])
    }

    /// The separating curve `[a1, b1] = a1 b1 A1 B1`.
    pub fn separating_curve() -> Word {
        Word(vec![A1, B1, A1.inverse(), B1.inverse()])
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.inverse()).collect())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn pow(&self, n: usize) -> Word {
        Word(self.0.repeat(n))
    }

    /// Cyclic rotation starting at position `i`.
    pub fn rotate(&self, i: usize) -> Word {
        let mut v = self.0.clone();
        if !v.is_empty() {
            v.rotate_left(i % self.len());
        }
        Word(v)
    }

    /// Free reduction.
    pub fn reduce(&self) -> Word {
        let mut out: Vec<Letter> = Vec::with_capacity(self.len());
        for &l in &self.0 {
            if out.last() == Some(&l.inverse()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word(out)
    }

    pub fn is_reduced(&self) -> bool {
        self.0.windows(2).all(|w| w[1] != w[0].inverse())
    }

    /// Free and cyclic reduction. Returns the conjugator prefix `p` and the
    /// cyclically reduced core `c` with `self = p c p^{-1}` after reduction.
    pub fn cyclic_reduce(&self) -> (Word, Word) {
        let w = self.reduce().0;
        let mut i = 0;
        let mut j = w.len();
        while j >= i + 2 && w[i] == w[j - 1].inverse() {
            i += 1;
            j -= 1;
        }
        (Word(w[..i].to_vec()), Word(w[i..j].to_vec()))
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        self.is_reduced()
            && (self.len() < 2 || self.0[0] != self.0[self.len() - 1].inverse())
    }

    /// Dehn-style shortening: repeatedly replace a subword of length >= 5 of
    /// a cyclic relator word by the inverse of its complement, with free
    /// reduction in between. Preserves the group element.
    pub fn dehn_shorten(&self) -> Word {
        let relators = cyclic_relators();
        let mut w = self.reduce();
        'outer: loop {
            for r in &relators {
                for len in (5..=8).rev() {
                    let pattern = &r[..len];
                    if let Some(pos) = find_subslice(&w.0, pattern) {
                        let replacement: Vec<Letter> =
                            r[len..].iter().rev().map(|l| l.inverse()).collect();
                        let mut v = w.0[..pos].to_vec();
                        v.extend(replacement);
                        v.extend_from_slice(&w.0[pos + len..]);
                        w = Word(v).reduce();
                        continue 'outer;
                    }
                }
            }
            return w;
        }
    }
}

fn find_subslice(hay: &[Letter], needle: &[Letter]) -> Option<usize> {
    if needle.len() > hay.len() {
        return None;
    }
    (0..=hay.len() - needle.len()).find(|&i| &hay[i..i + needle.len()] == needle)
}

/// The 16 cyclic permutations of the relator and its inverse.
pub fn cyclic_relators() -> Vec<Vec<Letter>> {
    let r = Word::relator();
    let ri = r.inverse();
    (0..8)
        .map(|i| r.rotate(i).0)
        .chain((0..8).map(|i| ri.rotate(i).0))
        .collect()
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(l.name())?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;
    fn from_str(s: &str) -> Result<Word> {
        Word::parse(s)
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Word, D::Error> {
        let s = String::deserialize(d)?;
        Word::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Real 2x2 matrix acting on the upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Mat2 {
        Mat2 { a, b, c, d }
    }

    pub fn diag(x: f64, y: f64) -> Mat2 {
        Mat2::new(x, 0.0, 0.0, y)
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    /// Inverse, assuming determinant one.
    pub fn inv(&self) -> Mat2 {
        Mat2::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn neg(&self) -> Mat2 {
        Mat2::new(-self.a, -self.b, -self.c, -self.d)
    }

    /// `cosh d(i, M i)` for determinant-one `M`.
    pub fn cosh_displacement(&self) -> f64 {
        0.5 * (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d)
    }

    pub fn displacement(&self) -> f64 {
        self.cosh_displacement().max(1.0).acosh()
    }

    pub fn max_abs_diff(&self, o: &Mat2) -> f64 {
        (self.a - o.a)
            .abs()
            .max((self.b - o.b).abs())
            .max((self.c - o.c).abs())
            .max((self.d - o.d).abs())
    }

    /// Distance to the nearer of `o` and `-o`.
    pub fn psl_distance(&self, o: &Mat2) -> f64 {
        self.max_abs_diff(o).min(self.max_abs_diff(&o.neg()))
    }

    pub fn to_complex(&self) -> [[Complex64; 2]; 2] {
        let r = |x: f64| Complex64::new(x, 0.0);
        [[r(self.a), r(self.b)], [r(self.c), r(self.d)]]
    }

    /// Möbius action on a point of the upper half-plane.
    pub fn apply(&self, z: Complex64) -> Complex64 {
        (z * self.a + self.b) / (z * self.c + self.d)
    }

    /// Rounded entries, sign-normalized so that `M` and `-M` share a key.
    pub fn key(&self, quantum: f64) -> [i64; 4] {
        let big = [self.a, self.b, self.c, self.d]
            .into_iter()
            .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        let s = if big < 0.0 { -1.0 } else { 1.0 };
        [
            (s * self.a / quantum).round() as i64,
            (s * self.b / quantum).round() as i64,
            (s * self.c / quantum).round() as i64,
            (s * self.d / quantum).round() as i64,
        ]
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.trace().abs() > 2.0 + 1e-12
    }

    /// Boundary fixed points `(attracting, repelling)` as disk angles in
    /// `[0, 2pi)`. Requires a hyperbolic matrix.
    pub fn fixed_angles(&self) -> (f64, f64) {
        let (vp, vm) = self.fixed_vectors();
        (vector_angle(vp), vector_angle(vm))
    }

    /// Homogeneous eigenvectors `(x, 1) ~ (v0, v1)` of the attracting and
    /// repelling fixed points.
    pub fn fixed_vectors(&self) -> ([f64; 2], [f64; 2]) {
        let t = self.trace();
        let disc = (t * t - 4.0).max(0.0).sqrt();
        let s = if t >= 0.0 { 1.0 } else { -1.0 };
        let big = 0.5 * (t + s * disc);
        let small = 1.0 / big;
        (self.eigvec(big), self.eigvec(small))
    }

    fn eigvec(&self, lambda: f64) -> [f64; 2] {
        let v1 = [self.b, lambda - self.a];
        let v2 = [lambda - self.d, self.c];
        if v1[0].hypot(v1[1]) >= v2[0].hypot(v2[1]) {
            v1
        } else {
            v2
        }
    }

    /// Fixed points as reals in the upper half-plane boundary chart
    /// (`f64::INFINITY` for the point at infinity).
    pub fn fixed_points(&self) -> (f64, f64) {
        let (vp, vm) = self.fixed_vectors();
        let x = |v: [f64; 2]| if v[1] == 0.0 { f64::INFINITY } else { v[0] / v[1] };
        (x(vp), x(vm))
    }
}

/// Disk angle of the boundary point `[v0 : v1]` of the real projective line.
pub fn vector_angle(v: [f64; 2]) -> f64 {
    (-2.0 * v[1].atan2(v[0])).rem_euclid(2.0 * PI)
}

/// Disk angle in `[0, 2pi)` of a real boundary point (infinity maps to 0).
pub fn real_to_angle(x: f64) -> f64 {
    if x.is_infinite() {
        0.0
    } else {
        vector_angle([x, 1.0])
    }
}

/// Inverse of [`real_to_angle`].
pub fn angle_to_real(phi: f64) -> f64 {
    let phi = phi.rem_euclid(2.0 * PI);
    if phi == 0.0 {
        f64::INFINITY
    } else {
        -1.0 / (0.5 * phi).tan()
    }
}

/// `2 arccosh(|tr M| / 2)`.
pub fn translation_length(m: &Mat2) -> Result<f64> {
    let t = m.trace().abs();
    if t <= 2.0 + 1e-12 {
        return Err(Error::NotHyperbolic { trace: t });
    }
    Ok(2.0 * (0.5 * t).acosh())
}

/// Inradius of the regular octagon with vertex angle pi/4.
pub fn octagon_inradius() -> f64 {
    let t = (PI / 8.0).tan();
    (1.0 / t).acosh()
}

/// Circumradius of the regular octagon with vertex angle pi/4.
pub fn octagon_circumradius() -> f64 {
    let c = 1.0 / (PI / 8.0).tan();
    (c * c).acosh()
}

/// Neighbour of `F` across side `j` is `NEIGHBOUR[j] * F`.
pub const NEIGHBOUR: [Letter; 8] = [
    Letter(0), // a1
    Letter(5), // B1
    Letter(4), // A1
    Letter(1), // b1
    Letter(2), // a2
    Letter(7), // B2
    Letter(6), // A2
    Letter(3), // b2
];

/// Reference Fuchsian representation: images of `a1 b1 a2 b2`.
#[derive(Clone, Debug, PartialEq)]
pub struct FuchsianRep {
    pub gens: [Mat2; 4],
    pub relator_residual: f64,
}

type Su11 = [[Complex64; 2]; 2];

fn su_mul(x: &Su11, y: &Su11) -> Su11 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
        }
    }
    out
}

fn rot(t: f64) -> Su11 {
    let z = Complex64::new(0.0, 0.0);
    [[Complex64::from_polar(1.0, 0.5 * t), z], [z, Complex64::from_polar(1.0, -0.5 * t)]]
}

fn boost(s: f64) -> Su11 {
    let c = Complex64::new((0.5 * s).cosh(), 0.0);
    let h = Complex64::new((0.5 * s).sinh(), 0.0);
    [[c, h], [h, c]]
}

/// Side pairing of the disk octagon mapping side `i` onto side `j`.
fn pairing(i: usize, j: usize) -> Su11 {
    let ti = i as f64 * FRAC_PI_4;
    let tj = j as f64 * FRAC_PI_4;
    su_mul(&su_mul(&rot(tj), &boost(2.0 * octagon_inradius())), &rot(PI - ti))
}

/// Conjugate a disk isometry to the upper half-plane via `z -> (z-i)/(z+i)`.
fn disk_to_half_plane(g: &Su11) -> Mat2 {
    let i = Complex64::new(0.0, 1.0);
    let one = Complex64::new(1.0, 0.0);
    let c = [[one, -i], [one, i]];
    // C^{-1} = 1/(2i) [[i, i], [-1, 1]]
    let s = one / (2.0 * i);
    let cinv = [[s * i, s * i], [-s, s]];
    let m = su_mul(&su_mul(&cinv, g), &c);
    Mat2::new(m[0][0].re, m[0][1].re, m[1][0].re, m[1][1].re)
}

impl FuchsianRep {
    pub fn gen(&self, l: Letter) -> Mat2 {
        let g = self.gens[l.generator()];
        if l.is_inverse() {
            g.inv()
        } else {
            g
        }
    }

    /// Product of generator images along the word, left to right.
    pub fn evaluate(&self, w: &Word) -> Mat2 {
        w.0.iter().fold(Mat2::IDENTITY, |acc, &l| acc.mul(&self.gen(l)))
    }

    pub fn length(&self, w: &Word) -> Result<f64> {
        translation_length(&self.evaluate(w))
    }

    /// Matrix of the neighbour element across side `j` of the octagon.
    pub fn neighbour(&self, side: usize) -> Mat2 {
        self.gen(NEIGHBOUR[side])
    }

    /// Shortest generator translation length.
    pub fn min_generator_length(&self) -> f64 {
        self.gens
            .iter()
            .map(|g| translation_length(g).unwrap_or(f64::INFINITY))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Regular-octagon genus-2 Fuchsian group.
pub fn fuchsian_reference() -> Result<FuchsianRep> {
    let gens = [
        disk_to_half_plane(&pairing(2, 0)),
        disk_to_half_plane(&pairing(1, 3)),
        disk_to_half_plane(&pairing(6, 4)),
        disk_to_half_plane(&pairing(5, 7)),
    ];
    let mut rep = FuchsianRep {
        gens,
        relator_residual: 0.0,
    };
    let r = rep.evaluate(&Word::relator());
    rep.relator_residual = r.psl_distance(&Mat2::IDENTITY);
    if rep.relator_residual >= 1e-10 {
        return Err(Error::ConstructionFailure(format!(
            "relator residual {:e}",
            rep.relator_residual
        )));
    }
    Ok(rep)
}

/// Klein-model point of a disk point.
fn disk_to_klein(w: Complex64) -> [f64; 2] {
    let s = 2.0 / (1.0 + w.norm_sqr());
    [s * w.re, s * w.im]
}

/// Disk point of an upper half-plane point.
pub fn half_plane_to_disk(z: Complex64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    (z - i) / (z + i)
}

/// Upper half-plane point of a Klein-model point.
pub fn klein_to_half_plane(k: [f64; 2]) -> Complex64 {
    let s = 1.0 + (1.0 - k[0] * k[0] - k[1] * k[1]).max(0.0).sqrt();
    let w = Complex64::new(k[0] / s, k[1] / s);
    let one = Complex64::new(1.0, 0.0);
    Complex64::new(0.0, 1.0) * (one + w) / (one - w)
}

/// Klein-model point of an upper half-plane point.
pub fn half_plane_to_klein(z: Complex64) -> [f64; 2] {
    disk_to_klein(half_plane_to_disk(z))
}

/// Outward unit normal of side `j` of `F` in the Klein model. `F` is the
/// set `n_j . k <= tanh(inradius)` for all `j`.
pub fn side_normal(j: usize) -> [f64; 2] {
    let t = j as f64 * FRAC_PI_4;
    [t.cos(), t.sin()]
}

/// Hyperbolic distance between Klein-model points.
pub fn klein_distance(p: [f64; 2], q: [f64; 2]) -> f64 {
    let pq = p[0] * q[0] + p[1] * q[1];
    let pp = p[0] * p[0] + p[1] * p[1];
    let qq = q[0] * q[0] + q[1] * q[1];
    ((1.0 - pq) / ((1.0 - pp) * (1.0 - qq)).sqrt()).max(1.0).acosh()
}

/// The oriented geodesic from boundary angle `from` to `to`, clipped
/// against the octagon in the Klein model.
#[derive(Clone, Copy, Debug)]
pub struct Clip {
    pub entry_side: usize,
    pub exit_side: usize,
    /// Hyperbolic length of the part inside the octagon.
    pub inside: f64,
}

/// Vertices closer than this (Euclidean, Klein model) to a chord count as
/// lying strictly on its left. This is a symbolic perturbation of every
/// geodesic slightly to the right: geodesics through vertices, and
/// geodesics along edges of the tiling, then cross a well-defined sequence
/// of cells that does not depend on the frame they are viewed in.
const VERTEX_TOL: f64 = 1e-8;

fn vertex(j: usize) -> [f64; 2] {
    let r = octagon_inradius().tanh() / (PI / 8.0).cos();
    let t = (j as f64 + 0.5) * FRAC_PI_4;
    [r * t.cos(), r * t.sin()]
}

pub fn clip_geodesic(from: f64, to: f64) -> Option<Clip> {
    let p0 = [from.cos(), from.sin()];
    let p1 = [to.cos(), to.sin()];
    let norm = (p1[0] - p0[0]).hypot(p1[1] - p0[1]);
    if norm == 0.0 {
        return None;
    }
    let u = [(p1[0] - p0[0]) / norm, (p1[1] - p0[1]) / norm];
    // Signed distance of each vertex to the chord, positive on the left.
    let mut dist = [0.0; 8];
    let mut left = [false; 8];
    for v in 0..8 {
        let q = vertex(v);
        dist[v] = u[0] * (q[1] - p0[1]) - u[1] * (q[0] - p0[0]);
        left[v] = dist[v] > -VERTEX_TOL;
        if left[v] {
            dist[v] = dist[v].max(0.0);
        }
    }
    if left.iter().all(|&l| l) || left.iter().all(|&l| !l) {
        return None;
    }
    // Side j joins vertices j-1 and j; exactly two sides change sign.
    let crossed: Vec<usize> = (0..8).filter(|&j| left[(j + 7) % 8] != left[j]).collect();
    debug_assert_eq!(crossed.len(), 2);
    let outward = |j: usize| {
        let n = side_normal(j);
        n[0] * u[0] + n[1] * u[1]
    };
    let (entry_side, exit_side) = if outward(crossed[0]) > outward(crossed[1]) {
        (crossed[1], crossed[0])
    } else {
        (crossed[0], crossed[1])
    };
    let crossing = |j: usize| {
        let (a, b) = ((j + 7) % 8, j);
        let (qa, qb) = (vertex(a), vertex(b));
        let f = (dist[a] / (dist[a] - dist[b])).clamp(0.0, 1.0);
        [qa[0] + f * (qb[0] - qa[0]), qa[1] + f * (qb[1] - qa[1])]
    };
    Some(Clip {
        entry_side,
        exit_side,
        inside: klein_distance(crossing(entry_side), crossing(exit_side)),
    })
}

/// Recompute a group element from its orbit point.
///
/// Long products whose intermediate factors are far from the identity lose
/// precision to cancellation. Greedy reduction of `g i` yields a word whose
/// suffixes move `i` no further than `g` does; evaluating it right to left
/// gives an accurate matrix.
pub fn refine(rep: &FuchsianRep, g: &Mat2) -> Mat2 {
    let c = octagon_inradius().tanh();
    let mut z = g.apply(Complex64::new(0.0, 1.0));
    let mut steps: Vec<Mat2> = Vec::new();
    for _ in 0..10_000 {
        let k = half_plane_to_klein(z);
        let (j, v) = (0..8)
            .map(|j| {
                let n = side_normal(j);
                (j, n[0] * k[0] + n[1] * k[1])
            })
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if v <= c {
            break;
        }
        let n = rep.neighbour(j);
        steps.push(n);
        z = n.inv().apply(z);
    }
    steps.iter().rev().fold(Mat2::IDENTITY, |acc, n| n.mul(&acc))
}

/// Reduce an upper half-plane point into the octagon. Returns the reducing
/// element `h` (so `h z` lies in `F`) and the reduced point.
pub fn reduce_point(rep: &FuchsianRep, z: Complex64) -> (Mat2, Complex64) {
    let c = octagon_inradius().tanh();
    let mut h = Mat2::IDENTITY;
    let mut z = z;
    for _ in 0..10_000 {
        let k = half_plane_to_klein(z);
        let (j, v) = (0..8)
            .map(|j| {
                let n = side_normal(j);
                (j, n[0] * k[0] + n[1] * k[1])
            })
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if v <= c + 1e-14 {
            break;
        }
        let step = rep.neighbour(j).inv();
        h = step.mul(&h);
        z = step.apply(z);
    }
    (h, z)
}

/// Primitive conjugacy class with its geodesic invariants.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConjClass {
    pub rep_word: Word,
    pub length: f64,
    /// Attracting and repelling fixed points as reals (boundary of the
    /// upper half-plane; infinity is `f64::INFINITY`).
    pub fix_plus: f64,
    pub fix_minus: f64,
    pub primitive: bool,
}

const KEY_QUANTUM: f64 = 1e-8;

impl ConjClass {
    /// Attracting and repelling fixed points as disk angles.
    pub fn angles(&self) -> (f64, f64) {
        (real_to_angle(self.fix_plus), real_to_angle(self.fix_minus))
    }

    /// Rounded canonical tuple `(attracting, repelling, length)`.
    pub fn key(&self) -> [i64; 3] {
        let (p, m) = self.angles();
        canonical_key(p, m, self.length)
    }
}

fn canonical_key(plus: f64, minus: f64, length: f64) -> [i64; 3] {
    let turn = (2.0 * PI / KEY_QUANTUM).round() as i64;
    let angle = |x: f64| ((x / KEY_QUANTUM).round() as i64).rem_euclid(turn);
    [angle(plus), angle(minus), (length / KEY_QUANTUM).round() as i64]
}

impl PartialEq for ConjClass {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for ConjClass {}

impl std::hash::Hash for ConjClass {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key().hash(state)
    }
}

/// Result of walking a closed geodesic through the tiling.
#[derive(Clone, Debug)]
pub struct AxisWalk {
    /// Cutting sequence of the primitive root, starting at the first exit.
    pub letters: Vec<Letter>,
    /// Conjugates whose axis crosses `F`, index `i` equal to the rotation of
    /// `letters` by `i`, with the length of the axis inside `F`.
    pub conjugates: Vec<(Mat2, f64)>,
    /// Translation length of the primitive root.
    pub root_length: f64,
}

const MAX_WALK: usize = 1000;

/// Walk the axis of `gamma` (which must cross `F`) until it closes up.
///
/// Axes through a vertex of `F` may start on a conjugate that touches `F`
/// only at that vertex and is not revisited; such a transient prefix is
/// dropped and only the periodic part is returned.
pub fn walk_axis(rep: &FuchsianRep, gamma: &Mat2) -> Result<AxisWalk> {
    let mut g = interior_start(rep, gamma)?;
    let gamma = &g.clone();
    let scale = gamma.cosh_displacement().max(1.0);
    let mut cell = Mat2::IDENTITY;
    let mut letters: Vec<Letter> = Vec::new();
    let mut conjugates: Vec<(Mat2, f64)> = Vec::new();
    for _ in 0..MAX_WALK {
        let (plus, minus) = g.fixed_angles();
        let clip = clip_geodesic(minus, plus).ok_or_else(|| {
            Error::ConstructionFailure("axis left the fundamental domain during walk".into())
        })?;
        conjugates.push((g, clip.inside));
        let letter = NEIGHBOUR[clip.exit_side];
        cell = cell.mul(&rep.gen(letter));
        g = cell.inv().mul(gamma).mul(&cell);
        letters.push(letter);
        if let Some(start) = conjugates.iter().position(|(c, _)| g.psl_distance(c) <= 1e-6 * scale) {
            let letters = letters.split_off(start);
            let conjugates = conjugates.split_off(start);
            let root = letters.iter().fold(Mat2::IDENTITY, |acc, &l| acc.mul(&rep.gen(l)));
            let root_length = translation_length(&root)?;
            return Ok(AxisWalk {
                letters,
                conjugates,
                root_length,
            });
        }
    }
    Err(Error::BudgetExceeded(format!(
        "axis walk did not close after {MAX_WALK} steps"
    )))
}

/// A conjugate of `gamma` whose axis crosses `F`, searching conjugators of
/// word length at most 4 when the axis of `gamma` itself does not.
fn interior_start(rep: &FuchsianRep, gamma: &Mat2) -> Result<Mat2> {
    let crosses = |g: &Mat2| {
        let (p, m) = g.fixed_angles();
        clip_geodesic(m, p).is_some()
    };
    if crosses(gamma) {
        return Ok(*gamma);
    }
    let mut layer = vec![(Mat2::IDENTITY, None::<Letter>)];
    for _ in 0..4 {
        let mut next = Vec::new();
        for (h, last) in &layer {
            for l in Letter::ALL {
                if *last == Some(l.inverse()) {
                    continue;
                }
                let h2 = h.mul(&rep.gen(l));
                let g = h2.inv().mul(gamma).mul(&h2);
                if crosses(&g) {
                    return Ok(g);
                }
                next.push((h2, Some(l)));
            }
        }
        layer = next;
    }
    Err(Error::ConstructionFailure("axis does not pass near the fundamental domain".into()))
}

fn class_from_walk(rep: &FuchsianRep, walk: &AxisWalk, power: usize) -> ConjClass {
    let m = walk.letters.len();
    let mut best: Option<([i64; 3], Word, usize)> = None;
    for (i, (g, _)) in walk.conjugates.iter().enumerate() {
        let (p, q) = g.fixed_angles();
        let ell = translation_length(g).unwrap_or(0.0);
        let key = canonical_key(p, q, ell);
        let word = Word(walk.letters.clone()).rotate(i % m);
        let better = match &best {
            None => true,
            Some((k, w, _)) => (key, &word) < (*k, w),
        };
        if better {
            best = Some((key, word, i));
        }
    }
    let (_, word, i) = best.expect("walk visits at least one conjugate");
    let word = word.pow(power).dehn_shorten();
    let g = walk.conjugates[i].0;
    let target = if power == 1 {
        g
    } else {
        rep.evaluate(&Word(walk.letters.clone()).rotate(i % m).pow(power))
    };
    let (fix_plus, fix_minus) = target.fixed_points();
    ConjClass {
        length: translation_length(&rep.evaluate(&word)).unwrap_or(0.0),
        rep_word: word,
        fix_plus,
        fix_minus,
        primitive: power == 1,
    }
}

/// Canonical conjugacy class of the element represented by `w`.
pub fn canonicalize(rep: &FuchsianRep, w: &Word) -> Result<ConjClass> {
    let (_, core) = w.cyclic_reduce();
    let core = core.dehn_shorten();
    let gamma = rep.evaluate(&core);
    let ell = translation_length(&gamma)?;
    // Move the point of the axis closest to i into F.
    let (vp, vm) = gamma.fixed_vectors();
    let foot = axis_foot(vp, vm);
    let (h, _) = reduce_point(rep, foot);
    let g = h.mul(&gamma).mul(&h.inv());
    let walk = walk_axis(rep, &g)?;
    let power = (ell / walk.root_length).round().max(1.0) as usize;
    Ok(class_from_walk(rep, &walk, power))
}

/// Point of the geodesic with endpoints `[vp]`, `[vm]` closest to `i`.
fn axis_foot(vp: [f64; 2], vm: [f64; 2]) -> Complex64 {
    let to_disk = |v: [f64; 2]| Complex64::from_polar(1.0, vector_angle(v));
    let p = to_disk(vp);
    let q = to_disk(vm);
    // In the disk, the closest point to 0 lies on the bisecting ray of the
    // endpoints, at Euclidean radius tanh(d/2) with cosh d = 1/sin(delta/2).
    let mid = p + q;
    let delta = (p / q).arg().abs();
    let d = (1.0 / (0.5 * delta).sin()).max(1.0).acosh();
    let w = if mid.norm() < 1e-15 {
        Complex64::new(0.0, 0.0)
    } else {
        mid / mid.norm() * (0.5 * d).tanh()
    };
    let i = Complex64::new(0.0, 1.0);
    i * (Complex64::new(1.0, 0.0) + w) / (Complex64::new(1.0, 0.0) - w)
}

/// Enumeration limits.
#[derive(Clone, Copy, Debug)]
pub struct EnumBudget {
    /// Maximum number of group elements visited in the ball search.
    pub max_elements: usize,
}

impl Default for EnumBudget {
    fn default() -> Self {
        EnumBudget {
            max_elements: 40_000_000,
        }
    }
}

/// All primitive conjugacy classes with translation length at most `radius`.
#[derive(Clone, Debug)]
pub struct ClassCatalog {
    pub radius: f64,
    /// Word-length cap `ceil(2R / l_min) + 8`.
    pub word_cap: usize,
    /// Sorted by length, then canonical key.
    pub classes: Vec<ConjClass>,
    pub elements_visited: usize,
}

impl ClassCatalog {
    pub fn enumerate(rep: &FuchsianRep, radius: f64) -> Result<ClassCatalog> {
        Self::enumerate_with(rep, radius, EnumBudget::default())
    }

    pub fn enumerate_with(rep: &FuchsianRep, radius: f64, budget: EnumBudget) -> Result<ClassCatalog> {
        if radius <= 0.0 || !radius.is_finite() {
            return Err(Error::Config(format!("radius must be positive, got {radius}")));
        }
        let word_cap = word_cap(rep, radius);
        let r_f = octagon_circumradius();
        let cosh_ball = (radius + 2.0 * r_f).cosh();
        let cosh_axis = r_f.cosh();
        let half_trace = (0.5 * radius).cosh() * (1.0 + 1e-12);

        // Distinct elements in the ball differ by far more than this; a
        // rolling window of layers is not used because a single misrounded
        // key would restart the search from the wrong layer.
        let quantum = 1e-5;
        let mut registered: HashSet<[i64; 4]> = HashSet::new();
        let mut found: HashMap<[i64; 3], ConjClass> = HashMap::new();

        let mut seen: HashSet<[i64; 4]> = HashSet::new();
        seen.insert(Mat2::IDENTITY.key(quantum));
        let mut cur: Vec<Mat2> = vec![Mat2::IDENTITY];
        let mut visited = 1usize;

        while !cur.is_empty() {
            let mut next: Vec<Mat2> = Vec::new();
            for g in &cur {
                for l in Letter::ALL {
                    let h = g.mul(&rep.gen(l));
                    if h.cosh_displacement() > cosh_ball {
                        continue;
                    }
                    let k = h.key(quantum);
                    if !seen.insert(k) {
                        continue;
                    }
                    next.push(h);
                }
            }
            visited += next.len();
            if visited > budget.max_elements {
                return Err(Error::BudgetExceeded(format!(
                    "ball search exceeded {} elements",
                    budget.max_elements
                )));
            }
            for g in &next {
                let ht = 0.5 * g.trace().abs();
                if ht <= 1.0 + 1e-12 || ht > half_trace {
                    continue;
                }
                // cosh dist(i, axis) = sinh(disp/2) / sinh(l/2)
                let sinh_half_l = (ht * ht - 1.0).sqrt();
                let sinh_half_disp = (0.5 * (g.cosh_displacement() - 1.0)).max(0.0).sqrt();
                if sinh_half_disp > cosh_axis * sinh_half_l * (1.0 + 1e-9) {
                    continue;
                }
                if registered.contains(&g.key(quantum)) {
                    continue;
                }
                let g = refine(rep, g);
                let (plus, minus) = g.fixed_angles();
                if clip_geodesic(minus, plus).is_none() {
                    continue;
                }
                let walk = walk_axis(rep, &g)?;
                for (c, _) in &walk.conjugates {
                    registered.insert(c.key(quantum));
                }
                let ell = translation_length(&g)?;
                if walk.root_length < ell - 1e-6 {
                    continue;
                }
                let class = class_from_walk(rep, &walk, 1);
                if class.rep_word.len() > word_cap {
                    return Err(Error::BudgetExceeded(format!(
                        "class word of length {} exceeds cap {word_cap}",
                        class.rep_word.len()
                    )));
                }
                found.entry(class.key()).or_insert(class);
            }
            cur = next;
        }

        let mut classes: Vec<ConjClass> = found.into_values().collect();
        classes.sort_by(|x, y| {
            x.length
                .total_cmp(&y.length)
                .then_with(|| x.key().cmp(&y.key()))
                .then_with(|| x.rep_word.cmp(&y.rep_word))
        });
        // Tolerant merge of classes whose keys differ only by rounding.
        let mut merged: Vec<ConjClass> = Vec::with_capacity(classes.len());
        for c in classes {
            let (p, m) = c.angles();
            let dup = merged.iter().rev().take_while(|d| c.length - d.length < 1e-8).any(|d| {
                let (dp, dm) = d.angles();
                angle_close(p, dp) && angle_close(m, dm) && (c.length - d.length).abs() < 1e-8
            });
            if !dup {
                merged.push(c);
            }
        }
        Ok(ClassCatalog {
            radius,
            word_cap,
            classes: merged,
            elements_visited: visited,
        })
    }

    /// Classes with length at most `r` (which should not exceed `radius`).
    pub fn up_to(&self, r: f64) -> &[ConjClass] {
        let n = self.classes.partition_point(|c| c.length <= r);
        &self.classes[..n]
    }

    pub fn count_up_to(&self, r: f64) -> usize {
        self.up_to(r).len()
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

fn angle_close(a: f64, b: f64) -> bool {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d) < 1e-8
}

pub fn word_cap(rep: &FuchsianRep, radius: f64) -> usize {
    (2.0 * radius / rep.min_generator_length()).ceil() as usize + 8
}

/// The first `count` distinct group elements in breadth-first order of word
/// length, each with the word that first reached it. Letters are tried in
/// [`Letter::ALL`] order, so the result is deterministic.
pub fn ball_words(rep: &FuchsianRep, count: usize) -> Vec<Word> {
    let quantum = 1e-5;
    let mut seen: HashSet<[i64; 4]> = HashSet::new();
    seen.insert(Mat2::IDENTITY.key(quantum));
    let mut out = vec![Word::empty()];
    let mut layer = vec![(Word::empty(), Mat2::IDENTITY)];
    while out.len() < count && !layer.is_empty() {
        let mut next = Vec::new();
        for (w, g) in &layer {
            for l in Letter::ALL {
                if w.0.last().is_some_and(|&x| x == l.inverse()) {
                    continue;
                }
                let h = g.mul(&rep.gen(l));
                if !seen.insert(h.key(quantum)) {
                    continue;
                }
                let mut v = w.clone();
                v.0.push(l);
                out.push(v.clone());
                next.push((v, h));
                if out.len() == count {
                    return out;
                }
            }
        }
        layer = next;
    }
    out
}

/// Convenience wrapper returning the class list.
pub fn enumerate_conjugacy_classes(rep: &FuchsianRep, radius: f64) -> Result<Vec<ConjClass>> {
    Ok(ClassCatalog::enumerate(rep, radius)?.classes)
}

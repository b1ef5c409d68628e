//! Linear representations of the surface group: the Fuchsian reference
//! point, irreducible and composite embeddings, bending along the separating
//! curve, and eigenvalue-gap spectra.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigen_by_modulus, exterior_power, schur_eigenvalues, MatC, C64, GAP_TOL};
use crate::surface::{ConjClass, FuchsianRep, Letter, Mat2, Word};

/// Residual bound accepted for the relator image of a constructed rep.
pub const RELATOR_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex> for C64 {
    fn from(z: Complex) -> C64 {
        C64::new(z.re, z.im)
    }
}

impl From<C64> for Complex {
    fn from(z: C64) -> Complex {
        Complex { re: z.re, im: z.im }
    }
}

/// Construction record of a representation, also its JSON config format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum RepSpec {
    Fuchsian,
    Irreducible { d: usize, base: Box<RepSpec> },
    Composite { parts: Vec<usize>, base: Box<RepSpec> },
    Bend { theta: Complex, base: Box<RepSpec> },
}

impl RepSpec {
    pub fn irreducible(d: usize) -> RepSpec {
        RepSpec::Irreducible { d, base: Box::new(RepSpec::Fuchsian) }
    }

    pub fn composite(parts: &[usize]) -> RepSpec {
        RepSpec::Composite { parts: parts.to_vec(), base: Box::new(RepSpec::Fuchsian) }
    }

    pub fn bend(base: RepSpec, theta: C64) -> RepSpec {
        RepSpec::Bend { theta: theta.into(), base: Box::new(base) }
    }

    pub fn from_json(s: &str) -> Result<RepSpec> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("representation spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }

    pub fn build(&self, rep0: &FuchsianRep) -> Result<LinearRep> {
        match self {
            RepSpec::Fuchsian => Ok(LinearRep::fuchsian(rep0)),
            RepSpec::Irreducible { d, base } => irreducible(&base.build(rep0)?, *d),
            RepSpec::Composite { parts, base } => composite(&base.build(rep0)?, parts),
            RepSpec::Bend { theta, base } => {
                bend(&base.build(rep0)?, &Word::separating_curve(), (*theta).into())
            }
        }
    }
}

/// A representation into SL(d, C), stored as images of all eight letters.
#[derive(Clone, Debug)]
pub struct LinearRep {
    pub d: usize,
    /// Images of `a1, b1, a2, b2` followed by their inverses, indexed by
    /// [`Letter::index`].
    letters: Vec<MatC>,
    pub relator_residual: f64,
    pub provenance: RepSpec,
    exterior: Arc<Vec<OnceLock<Vec<MatC>>>>,
}

impl LinearRep {
    /// Build from the four generator images; inverses are computed here.
    pub fn from_generators(gens: [MatC; 4], provenance: RepSpec) -> Result<LinearRep> {
        let d = gens[0].dim();
        if gens.iter().any(|g| g.dim() != d) {
            return Err(Error::DimensionMismatch("generator sizes differ".into()));
        }
        let mut letters = Vec::with_capacity(8);
        for g in &gens {
            letters.push(g.clone());
        }
        for g in &gens {
            letters.push(g.inverse()?);
        }
        Self::from_letters(letters, provenance)
    }

    fn from_letters(letters: Vec<MatC>, provenance: RepSpec) -> Result<LinearRep> {
        let d = letters[0].dim();
        let mut rep = LinearRep {
            d,
            letters,
            relator_residual: 0.0,
            provenance,
            exterior: Arc::new((0..=d).map(|_| OnceLock::new()).collect()),
        };
        let (image, peak) = rep.relator_image();
        rep.relator_residual = central_distance(&image);
        let tol = RELATOR_TOL.max(relator_floor(d, peak));
        if !(rep.relator_residual < tol) {
            return Err(Error::ConstructionFailure(format!(
                "relator residual {:e} exceeds {tol:e}",
                rep.relator_residual
            )));
        }
        Ok(rep)
    }

    /// Relator image together with the largest norm of its partial products.
    fn relator_image(&self) -> (MatC, f64) {
        let mut out = MatC::identity(self.d);
        let mut peak: f64 = 1.0;
        for &l in Word::relator().letters() {
            out = out.mul(self.gen(l));
            peak = peak.max(out.norm());
        }
        (out, peak)
    }

    /// Residual the relator can be expected to reach in double precision.
    pub fn relator_tolerance(&self) -> f64 {
        RELATOR_TOL.max(relator_floor(self.d, self.relator_image().1))
    }

    pub fn fuchsian(rep0: &FuchsianRep) -> LinearRep {
        let letters = Letter::ALL.iter().map(|&l| mat2_to_c(&rep0.gen(l))).collect();
        Self::from_letters(letters, RepSpec::Fuchsian).expect("reference group satisfies its relator")
    }

    pub fn gen(&self, l: Letter) -> &MatC {
        &self.letters[l.index()]
    }

    pub fn generators(&self) -> [MatC; 4] {
        std::array::from_fn(|i| self.letters[i].clone())
    }

    /// Product of letter images in order; the empty word gives the identity.
    pub fn evaluate(&self, w: &Word) -> MatC {
        let mut out = MatC::identity(self.d);
        for &l in w.letters() {
            out = out.mul(self.gen(l));
        }
        out
    }

    fn exterior_letters(&self, k: usize) -> &[MatC] {
        self.exterior[k].get_or_init(|| self.letters.iter().map(|m| exterior_power(m, k)).collect())
    }

    /// Image of `w` under the `k`-th exterior power of the representation,
    /// multiplied letter by letter so that small minors keep their accuracy.
    pub fn evaluate_exterior(&self, w: &Word, k: usize) -> MatC {
        let ext = self.exterior_letters(k);
        let mut out = MatC::identity(ext[0].dim());
        for &l in w.letters() {
            out = out.mul(&ext[l.index()]);
        }
        out
    }

    /// `P rep P^{-1}`.
    pub fn conjugate(&self, p: &MatC) -> Result<LinearRep> {
        let pinv = p.inverse()?;
        let letters = self.letters.iter().map(|g| p.mul(g).mul(&pinv)).collect();
        Self::from_letters(letters, self.provenance.clone())
    }

    /// Precompose with an endomorphism of the free group given by the images
    /// of the four generators. The result is a representation only when the
    /// map preserves the relator up to conjugacy.
    pub fn precompose(&self, images: &[Word; 4]) -> Result<LinearRep> {
        let gens = std::array::from_fn(|i| self.evaluate(&images[i]));
        Self::from_generators(gens, self.provenance.clone())
    }

    pub fn is_fuchsian(&self) -> bool {
        self.provenance == RepSpec::Fuchsian
    }
}

/// Rounding floor for the relator residual. Entry rounding in the stored
/// letters is amplified by roughly the square of the largest partial product,
/// which for `iota_5` of the octagon group already exceeds `1e-8`.
fn relator_floor(d: usize, peak: f64) -> f64 {
    1e-15 * d as f64 * peak * peak
}

/// Distance of `m` from the nearest scalar matrix `omega I` with `omega^d = 1`.
fn central_distance(m: &MatC) -> f64 {
    let d = m.dim();
    (0..d)
        .map(|j| {
            let omega = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / d as f64);
            m.max_abs_diff(&MatC::identity(d).scale(omega))
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn mat2_to_c(m: &Mat2) -> MatC {
    MatC::from_real(2, &[m.a, m.b, m.c, m.d])
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Action of a 2x2 matrix on homogeneous polynomials of degree `d - 1`, in
/// the monomial basis `X^{d-1-j} Y^j`.
///
/// `A` acts by the substitution `(X, Y) -> (aX + cY, bX + dY)`, i.e. through
/// the transpose, which makes the map a homomorphism. The attracting line of
/// the image is then `(v0 X + v1 Y)^{d-1}` for the attracting eigenvector
/// `(v0, v1)` of `A`.
pub fn irreducible_embed(m: &MatC, d: usize) -> Result<MatC> {
    if m.dim() != 2 {
        return Err(Error::DimensionMismatch(format!("expected a 2x2 matrix, got {}", m.dim())));
    }
    if d == 0 {
        return Err(Error::BadPartition { parts: vec![0], d });
    }
    let (a, b, c, dd) = (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1));
    let n = d - 1;
    let mut out = DMatrix::<C64>::zeros(d, d);
    for j in 0..d {
        // (aX + cY)^{n-j} (bX + dY)^j
        let p = binomial_expand(a, c, n - j);
        let q = binomial_expand(b, dd, j);
        for (s, ps) in p.iter().enumerate() {
            for (t, qt) in q.iter().enumerate() {
                out[(s + t, j)] += ps * qt;
            }
        }
    }
    Ok(MatC(out).to_sl())
}

/// Coefficients of `Y^i` in `(x X + y Y)^n`.
fn binomial_expand(x: C64, y: C64, n: usize) -> Vec<C64> {
    (0..=n)
        .map(|i| x.powu((n - i) as u32) * y.powu(i as u32) * binomial(n, i))
        .collect()
}

pub fn check_partition(parts: &[usize]) -> Result<usize> {
    let d: usize = parts.iter().sum();
    let bad = parts.is_empty() || parts.contains(&0) || parts.windows(2).any(|w| w[0] < w[1]);
    if bad {
        return Err(Error::BadPartition { parts: parts.to_vec(), d });
    }
    Ok(d)
}

/// Block-diagonal sum of irreducible embeddings, blocks in the given order.
pub fn composite_embed(m: &MatC, parts: &[usize]) -> Result<MatC> {
    let d = check_partition(parts)?;
    let mut out = DMatrix::<C64>::zeros(d, d);
    let mut off = 0;
    for &p in parts {
        let block = irreducible_embed(m, p)?;
        out.view_mut((off, off), (p, p)).copy_from(&block.0);
        off += p;
    }
    Ok(MatC(out).to_sl())
}

fn require_rank_two(base: &LinearRep) -> Result<()> {
    if base.d != 2 {
        return Err(Error::DimensionMismatch(format!(
            "embeddings need a 2-dimensional base, got d = {}",
            base.d
        )));
    }
    Ok(())
}

/// `iota_d` composed with a 2-dimensional representation.
pub fn irreducible(base: &LinearRep, d: usize) -> Result<LinearRep> {
    require_rank_two(base)?;
    if d < 2 {
        return Err(Error::BadPartition { parts: vec![d], d });
    }
    let letters = base
        .letters
        .iter()
        .map(|m| irreducible_embed(m, d))
        .collect::<Result<Vec<_>>>()?;
    LinearRep::from_letters(letters, RepSpec::Irreducible { d, base: Box::new(base.provenance.clone()) })
}

/// `iota_{d_1, ..., d_s}` composed with a 2-dimensional representation.
pub fn composite(base: &LinearRep, parts: &[usize]) -> Result<LinearRep> {
    require_rank_two(base)?;
    let d = check_partition(parts)?;
    if d < 2 {
        return Err(Error::BadPartition { parts: parts.to_vec(), d });
    }
    let letters = base
        .letters
        .iter()
        .map(|m| composite_embed(m, parts))
        .collect::<Result<Vec<_>>>()?;
    LinearRep::from_letters(
        letters,
        RepSpec::Composite { parts: parts.to_vec(), base: Box::new(base.provenance.clone()) },
    )
}

/// Generator of the one-parameter group used for bending along the image of
/// `curve`: eigenbasis of `rep(curve)` with principal logarithms of the
/// eigenvalues, made traceless and scaled so the top log-modulus gap is 1.
///
/// Returns `(V, x)` with the bending element `exp(theta X) = V diag(exp(theta x)) V^{-1}`.
pub fn bending_direction(rep: &LinearRep, curve: &Word) -> Result<(MatC, Vec<C64>)> {
    let c = rep.evaluate(curve);
    let eig = eigen_by_modulus(&c)?;
    if eig.tie_warning() {
        return Err(Error::NotLoxodromic);
    }
    let d = rep.d;
    let logs: Vec<C64> = eig.values.iter().map(|z| z.ln()).collect();
    let mean = logs.iter().sum::<C64>() / d as f64;
    let x: Vec<C64> = logs.iter().map(|z| z - mean).collect();
    let speed = (x[0] - x[1]).re;
    let x = x.into_iter().map(|z| z / speed).collect();
    Ok((MatC(eig.vectors.clone()), x))
}

/// Bend along the separating curve `[a1, b1]`: keep `a1, b1` and conjugate
/// `a2, b2` by `exp(theta X_c)`.
pub fn bend(rep: &LinearRep, curve: &Word, theta: C64) -> Result<LinearRep> {
    if *curve != Word::separating_curve() {
        return Err(Error::InvalidWord(format!(
            "bending is only supported along {}, got {curve}",
            Word::separating_curve()
        )));
    }
    let (v, x) = bending_direction(rep, curve)?;
    let vinv = v.inverse()?;
    let exp = |s: C64| {
        let diag = MatC::diag(&x.iter().map(|xi| (s * xi).exp()).collect::<Vec<_>>());
        v.mul(&diag).mul(&vinv)
    };
    let g = exp(theta);
    let ginv = exp(-theta);
    let mut letters = rep.letters.clone();
    for l in [Letter::new(2), Letter::new(3), Letter::new(6), Letter::new(7)] {
        letters[l.index()] = g.mul(&rep.letters[l.index()]).mul(&ginv);
    }
    let provenance = RepSpec::Bend { theta: theta.into(), base: Box::new(rep.provenance.clone()) };
    LinearRep::from_letters(letters, provenance)
}

/// Dominant eigenvalue of `A` and the relative gap to the next modulus.
fn dominant(a: &MatC) -> Result<(C64, f64)> {
    let mut vals = schur_eigenvalues(a)?;
    vals.sort_by(|x, y| y.norm().total_cmp(&x.norm()));
    let top = vals[0];
    let gap = match vals.get(1) {
        Some(next) if top.norm() > 0.0 => 1.0 - next.norm() / top.norm(),
        _ => 1.0,
    };
    Ok((top, gap))
}

/// Conjugator `p` and core `c` with `w = p c p^{-1}` in the group, where `c`
/// is the cyclic rotation of the cyclically reduced core of `w` whose image
/// has the smallest norm. Eigenvalues of conjugated words are badly
/// conditioned: `rep(b1 a2 B1)` under `iota_5` has norm 4e7 for a top
/// eigenvalue of 91, and its second exterior power loses every digit.
pub fn balanced_core(rep: &LinearRep, w: &Word) -> (Word, Word) {
    let (p, c) = w.cyclic_reduce();
    if c.len() < 2 {
        return (p, c);
    }
    let whole = rep.evaluate(&c);
    let mut s = MatC::identity(rep.d);
    let mut s_inv = MatC::identity(rep.d);
    let mut best = (whole.norm(), 0);
    for (i, &l) in c.letters().iter().enumerate().take(c.len() - 1) {
        s = s.mul(rep.gen(l));
        s_inv = rep.gen(l.inverse()).mul(&s_inv);
        let n = s_inv.mul(&whole).mul(&s).norm();
        if n < best.0 {
            best = (n, i + 1);
        }
    }
    let i = best.1;
    // c = s r s^{-1} with s = c[..i] and r = rotate(c, i)
    let prefix = p.concat(&Word(c.letters()[..i].to_vec()));
    (prefix, c.rotate(i))
}

/// Products of the leading eigenvalues `p_k = l_1 ... l_k` of `rep(w)` for
/// the requested `k`, read off the dominant eigenvalue of the `k`-th exterior
/// power. The second member of each pair is the relative modulus gap
/// `1 - |l_{k+1}| / |l_k|`.
fn leading_products(rep: &LinearRep, w: &Word, ks: &[usize]) -> Result<Vec<(C64, f64)>> {
    let (_, w) = balanced_core(rep, w);
    let w = &w;
    ks.iter()
        .map(|&k| {
            if k == 0 {
                Ok((C64::new(1.0, 0.0), 1.0))
            } else if k == rep.d {
                let det: C64 = w.letters().iter().map(|&l| rep.gen(l).det()).product();
                Ok((det, 1.0))
            } else {
                dominant(&rep.evaluate_exterior(w, k))
            }
        })
        .collect()
}

fn check_gap(k: usize, rel: f64) -> Result<()> {
    // rel = 1 - 1/|L^k|; compare |L^k| - 1 against the tolerance
    let ratio_minus_one = rel / (1.0 - rel).max(f64::MIN_POSITIVE);
    if !(ratio_minus_one >= GAP_TOL) {
        return Err(Error::InsufficientGap { k, rel_gap: ratio_minus_one });
    }
    Ok(())
}

/// `L^k(w) = l_k / l_{k+1}` for a single `k`, requiring only the `k`-th gap.
pub fn gap(rep: &LinearRep, w: &Word, k: usize) -> Result<C64> {
    if k == 0 || k >= rep.d {
        return Err(Error::DimensionMismatch(format!("gap index {k} outside 1..{}", rep.d - 1)));
    }
    let p = leading_products(rep, w, &[k - 1, k, k + 1])?;
    check_gap(k, p[1].1)?;
    Ok(p[1].0 * p[1].0 / (p[0].0 * p[2].0))
}

/// The `d - 1` eigenvalue gaps of `rep(w)` and its eigenvalue moduli.
#[derive(Clone, Debug, Serialize)]
pub struct GapSpectrum {
    pub word: Word,
    /// `gaps[k - 1] = L^k`.
    #[serde(skip)]
    pub gaps: Vec<C64>,
    pub log_moduli: Vec<f64>,
    /// Eigenvalue moduli, largest first.
    pub moduli: Vec<f64>,
}

impl GapSpectrum {
    pub fn gap(&self, k: usize) -> C64 {
        self.gaps[k - 1]
    }

    pub fn log_modulus(&self, k: usize) -> f64 {
        self.log_moduli[k - 1]
    }
}

pub fn gap_spectrum(rep: &LinearRep, w: &Word) -> Result<GapSpectrum> {
    let d = rep.d;
    let ks: Vec<usize> = (0..=d).collect();
    let p = leading_products(rep, w, &ks)?;
    let mut gaps = Vec::with_capacity(d - 1);
    for k in 1..d {
        check_gap(k, p[k].1)?;
        gaps.push(p[k].0 * p[k].0 / (p[k - 1].0 * p[k + 1].0));
    }
    let log_moduli = gaps.iter().map(|z| z.norm().ln()).collect();
    let moduli = (1..=d).map(|k| (p[k].0 / p[k - 1].0).norm()).collect();
    Ok(GapSpectrum { word: w.clone(), gaps, log_moduli, moduli })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Comparison {
    pub holds: bool,
    /// Worst deviation observed over all classes and indices.
    pub worst: f64,
}

/// Whether two representations have the same gaps on every class, to `tol`
/// in relative deviation `|L_1 - L_2| / |L_1|`. Gaps grow like `e^length`, so
/// an absolute tolerance would tighten with the class length.
pub fn gap_fingerprint_equal(
    rep1: &LinearRep,
    rep2: &LinearRep,
    classes: &[ConjClass],
    tol: f64,
) -> Result<Comparison> {
    if rep1.d != rep2.d {
        return Err(Error::DimensionMismatch(format!("d = {} vs d = {}", rep1.d, rep2.d)));
    }
    let mut worst: f64 = 0.0;
    for c in classes {
        let s1 = gap_spectrum(rep1, &c.rep_word)?;
        let s2 = gap_spectrum(rep2, &c.rep_word)?;
        for (x, y) in s1.gaps.iter().zip(&s2.gaps) {
            worst = worst.max((x - y).norm() / x.norm());
        }
    }
    Ok(Comparison { holds: worst < tol, worst })
}

/// Whether every gap on the given classes is real and positive, i.e.
/// `|Im log L^k| < tol`.
pub fn is_real_gap_spectrum(rep: &LinearRep, classes: &[ConjClass], tol: f64) -> Result<Comparison> {
    let mut worst: f64 = 0.0;
    for c in classes {
        let s = gap_spectrum(rep, &c.rep_word)?;
        for z in &s.gaps {
            worst = worst.max(z.arg().abs());
        }
    }
    Ok(Comparison { holds: worst < tol, worst })
}

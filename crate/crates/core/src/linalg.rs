//! Dense complex linear algebra for small matrices (d <= 12).
//!
//! Eigenvalues are ordered largest modulus first: `values[0]` is the top
//! eigenvalue. Flags are stored as one orthonormal frame whose leading
//! `k` columns span the `k`-dimensional member.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default relative modulus gap below which two eigenvalues count as tied.
pub const GAP_TOL: f64 = 1e-8;

/// Relative singular-value threshold used for numerical rank decisions.
pub const RANK_TOL: f64 = 1e-9;

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 10_000;

/// A square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct MatC(pub DMatrix<C64>);

impl MatC {
    pub fn identity(d: usize) -> Self {
        MatC(DMatrix::identity(d, d))
    }

    pub fn zeros(d: usize) -> Self {
        MatC(DMatrix::zeros(d, d))
    }

    pub fn from_fn(d: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        MatC(DMatrix::from_fn(d, d, f))
    }

    pub fn from_real(d: usize, rows: &[f64]) -> Self {
        assert_eq!(rows.len(), d * d);
        MatC::from_fn(d, |i, j| C64::new(rows[i * d + j], 0.0))
    }

    pub fn diag(values: &[C64]) -> Self {
        let d = values.len();
        MatC::from_fn(d, |i, j| if i == j { values[i] } else { C64::new(0.0, 0.0) })
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn mul(&self, other: &MatC) -> MatC {
        MatC(&self.0 * &other.0)
    }

    pub fn scale(&self, s: C64) -> MatC {
        MatC(self.0.map(|x| x * s))
    }

    pub fn adjoint(&self) -> MatC {
        MatC(self.0.adjoint())
    }

    pub fn det(&self) -> C64 {
        self.0.clone().determinant()
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn inverse(&self) -> Result<MatC> {
        self.0
            .clone()
            .try_inverse()
            .map(MatC)
            .ok_or_else(|| Error::DegenerateInput("singular matrix".into()))
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &MatC) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Conjugate by `p`: returns `p * self * p^{-1}`.
    pub fn conjugate_by(&self, p: &MatC) -> Result<MatC> {
        Ok(p.mul(self).mul(&p.inverse()?))
    }

    /// Rescale to determinant one (principal d-th root).
    pub fn to_sl(&self) -> MatC {
        let det = self.det();
        let s = det.powf(-1.0 / self.dim() as f64);
        self.scale(s)
    }

    pub fn pow(&self, n: u32) -> MatC {
        let mut out = MatC::identity(self.dim());
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Eigen decomposition sorted by non-increasing modulus.
#[derive(Clone, Debug)]
pub struct EigenData {
    pub values: Vec<C64>,
    /// Unit eigenvectors as columns, matching `values`.
    pub vectors: DMatrix<C64>,
    pub residuals: Vec<f64>,
    /// Indices `i` where `|values[i]|` and `|values[i+1]|` are tied.
    pub ties: Vec<usize>,
    /// Largest deviation between the Schur and characteristic-polynomial
    /// eigenvalues (only computed for d <= 4).
    pub crosscheck: Option<f64>,
}

impl EigenData {
    pub fn tie_warning(&self) -> bool {
        !self.ties.is_empty()
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    pub fn vector(&self, i: usize) -> DVector<C64> {
        self.vectors.column(i).into_owned()
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    // a >= b >= 0
    if a == 0.0 {
        0.0
    } else {
        (a - b) / a
    }
}

/// Sort by modulus descending; within tie clusters sort by argument ascending.
pub(crate) fn sort_by_modulus(values: &mut [C64], gap_tol: f64) -> Vec<usize> {
    values.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    let mut ties = Vec::new();
    let mut start = 0;
    for i in 0..values.len() {
        let end_of_cluster = i + 1 == values.len()
            || relative_gap(values[i].norm(), values[i + 1].norm()) >= gap_tol;
        if !end_of_cluster {
            ties.push(i);
        } else {
            values[start..=i].sort_by(|a, b| a.arg().total_cmp(&b.arg()));
            start = i + 1;
        }
    }
    ties
}

/// Eigenvalues through the complex Schur form.
pub fn schur_eigenvalues(a: &MatC) -> Result<Vec<C64>> {
    let schur = nalgebra::Schur::try_new(a.0.clone(), SCHUR_EPS, SCHUR_MAX_ITER)
        // The shifted QR stalls on some exactly repeated spectra (third
        // exterior power of iota_6 of a generator); a unitary change of
        // basis breaks the symmetry without moving the eigenvalues.
        .or_else(|| {
            (1..=4).find_map(|seed| {
                let q = scrambling_unitary(a.dim(), seed);
                nalgebra::Schur::try_new(q.adjoint() * &a.0 * &q, SCHUR_EPS, SCHUR_MAX_ITER)
            })
        })
        .ok_or(Error::ConvergenceFailure)?;
    let (_, t) = schur.unpack();
    Ok((0..a.dim()).map(|i| t[(i, i)]).collect())
}

/// Fixed dense unitary, the Q factor of an integer-pattern matrix.
fn scrambling_unitary(n: usize, seed: usize) -> DMatrix<C64> {
    let g = DMatrix::from_fn(n, n, |i, j| {
        let re = (i * 7 + j * 13 + seed * 5) % 11;
        let im = (i * 3 + j * 5 + seed * seed) % 7;
        C64::new(re as f64 - 5.0, im as f64 - 3.0)
    });
    g.qr().q()
}

/// Characteristic polynomial coefficients `[c0, c1, ..., c_{d-1}, 1]` of
/// `det(x I - A)` via Faddeev-LeVerrier.
pub fn charpoly(a: &MatC) -> Vec<C64> {
    let d = a.dim();
    let mut coeffs = vec![C64::new(0.0, 0.0); d + 1];
    coeffs[d] = C64::new(1.0, 0.0);
    let mut m = DMatrix::<C64>::zeros(d, d);
    for k in 1..=d {
        // M_k = A M_{k-1} + c_{d-k+1} I
        let mut next = &a.0 * &m;
        for i in 0..d {
            next[(i, i)] += coeffs[d - k + 1];
        }
        m = next;
        let am = &a.0 * &m;
        coeffs[d - k] = -am.trace() / k as f64;
    }
    coeffs
}

fn poly_eval(coeffs: &[C64], x: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

/// Roots of a monic polynomial by Aberth-Ehrlich iteration.
pub fn polynomial_roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return Ok(Vec::new());
    }
    // Cauchy bound for the initial circle.
    let bound = 1.0 + coeffs[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut roots: Vec<C64> = (0..n)
        .map(|k| C64::from_polar(0.5 * bound, 0.4 + 2.0 * std::f64::consts::PI * k as f64 / n as f64))
        .collect();
    for _ in 0..500 {
        let mut max_step: f64 = 0.0;
        for i in 0..n {
            let (p, dp) = poly_eval(coeffs, roots[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let sum: C64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| C64::new(1.0, 0.0) / (roots[i] - roots[j]))
                .sum();
            let step = ratio / (C64::new(1.0, 0.0) - ratio * sum);
            if step.re.is_finite() && step.im.is_finite() {
                roots[i] -= step;
                max_step = max_step.max(step.norm() / roots[i].norm().max(1e-300));
            }
        }
        if max_step < 1e-15 {
            return Ok(roots);
        }
    }
    // Multiple roots converge only linearly; accept if residuals are tiny.
    let scale = coeffs.iter().map(|c| c.norm()).fold(1.0, f64::max);
    if roots.iter().all(|&r| poly_eval(coeffs, r).0.norm() < 1e-6 * scale) {
        Ok(roots)
    } else {
        Err(Error::ConvergenceFailure)
    }
}

/// Eigenvalues from characteristic-polynomial roots. Intended for d <= 4.
pub fn charpoly_eigenvalues(a: &MatC) -> Result<Vec<C64>> {
    polynomial_roots(&charpoly(a))
}

/// Greedy multiset matching distance between two eigenvalue lists,
/// relative to the larger modulus of each pair.
pub fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    let mut used = vec![false; b.len()];
    let mut worst: f64 = 0.0;
    for x in a {
        let (j, dist) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm() / x.norm().max(y.norm()).max(1.0)))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("lists of equal length");
        used[j] = true;
        worst = worst.max(dist);
    }
    worst
}

/// Orthonormal basis of the numerical null space of `m`, in ascending order
/// of singular value, taking exactly `count` vectors.
fn smallest_right_singular_vectors(m: &DMatrix<C64>, count: usize) -> DMatrix<C64> {
    let n = m.ncols();
    // Pad to square so that v_t is n x n.
    let padded = if m.nrows() < n {
        let mut p = DMatrix::<C64>::zeros(n, n);
        p.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    DMatrix::from_fn(n, count, |i, c| v_t[(order[c], i)].conj())
}

/// Singular values (descending) and right singular vectors (as columns, same
/// order) of an arbitrary complex matrix.
pub fn svd_right(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.ncols();
    let padded = if m.nrows() < n {
        let mut p = DMatrix::<C64>::zeros(n, n);
        p.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |i, c| v_t[(order[c], i)].conj());
    (values, vecs)
}

/// Eigen decomposition ordered by non-increasing modulus.
pub fn eigen_by_modulus(a: &MatC) -> Result<EigenData> {
    eigen_by_modulus_with(a, GAP_TOL)
}

pub fn eigen_by_modulus_with(a: &MatC, gap_tol: f64) -> Result<EigenData> {
    let d = a.dim();
    if !a.is_finite() {
        return Err(Error::DegenerateInput("non-finite matrix entries".into()));
    }
    let mut values = schur_eigenvalues(a)?;
    let crosscheck = if d <= 4 {
        let cp = charpoly_eigenvalues(a)?;
        Some(multiset_distance(&values, &cp))
    } else {
        None
    };
    let ties = sort_by_modulus(&mut values, gap_tol);

    // Eigenvectors: null vectors of A - lambda I, one cluster at a time so
    // that repeated eigenvalues receive independent vectors.
    // Clusters are relative to the eigenvalue: small eigenvalues of a matrix
    // with a wide spectrum are distinct well below 1e-7 |A|. The floor covers
    // the rounding Schur leaves on repeated values.
    let scale = a.norm().max(1.0);
    let floor = 1e3 * f64::EPSILON * scale;
    let mut vectors = DMatrix::<C64>::zeros(d, d);
    let mut i = 0;
    while i < d {
        let mut j = i + 1;
        while j < d && (values[j] - values[i]).norm() <= 1e-7 * values[i].norm() + floor {
            j += 1;
        }
        let count = j - i;
        let mean: C64 = values[i..j].iter().sum::<C64>() / count as f64;
        let mut shifted = a.0.clone();
        for r in 0..d {
            shifted[(r, r)] -= mean;
        }
        let null = smallest_right_singular_vectors(&shifted, count);
        for c in 0..count {
            let mut v = null.column(c).into_owned();
            // Fix the phase: largest component real positive.
            let (imax, _) = v
                .iter()
                .enumerate()
                .max_by(|p, q| p.1.norm().total_cmp(&q.1.norm()))
                .unwrap();
            let phase = v[imax] / v[imax].norm();
            v /= phase;
            vectors.set_column(i + c, &v);
        }
        i = j;
    }
    let residuals = (0..d)
        .map(|c| {
            let v = vectors.column(c);
            (&a.0 * v - v * values[c]).norm()
        })
        .collect();
    Ok(EigenData {
        values,
        vectors,
        residuals,
        ties,
        crosscheck,
    })
}

/// Riemannian translation length in the symmetric space: sqrt(sum log^2 |l_i|).
pub fn symmetric_space_length(a: &MatC) -> Result<f64> {
    let eig = eigen_by_modulus(a)?;
    Ok(eig
        .values
        .iter()
        .map(|z| z.norm().ln().powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Modified Gram-Schmidt on the columns of `m`, twice for stability.
pub fn orthonormalize(m: &DMatrix<C64>) -> DMatrix<C64> {
    let mut q = m.clone();
    for _ in 0..2 {
        for j in 0..q.ncols() {
            for i in 0..j {
                let qi = q.column(i).into_owned();
                let proj = qi.dotc(&q.column(j));
                let mut col = q.column_mut(j);
                col -= qi * proj;
            }
            let n = q.column(j).norm();
            if n > 0.0 {
                let mut col = q.column_mut(j);
                col /= C64::new(n, 0.0);
            }
        }
    }
    q
}

/// A (partial) flag stored as a nested orthonormal frame.
#[derive(Clone, Debug)]
pub struct Flag {
    pub dims: Vec<usize>,
    /// d x max(dims) orthonormal frame; the first `k` columns span the
    /// `k`-dimensional member for every `k` in `dims`.
    pub frame: DMatrix<C64>,
}

impl Flag {
    pub fn ambient_dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn max_dim(&self) -> usize {
        self.frame.ncols()
    }

    /// Basis for the `k`-dimensional member. `k` must be listed in `dims`,
    /// or be 0 / the ambient dimension.
    pub fn subspace(&self, k: usize) -> DMatrix<C64> {
        let d = self.ambient_dim();
        if k == d {
            return DMatrix::identity(d, d);
        }
        assert!(k == 0 || self.dims.contains(&k), "dimension {k} not in flag {:?}", self.dims);
        self.frame.columns(0, k).into_owned()
    }

    pub fn has(&self, k: usize) -> bool {
        k == 0 || k == self.ambient_dim() || self.dims.contains(&k)
    }

    /// Largest deviation of the frame from orthonormality.
    pub fn orthonormality_residual(&self) -> f64 {
        let g = self.frame.adjoint() * &self.frame;
        let id = DMatrix::<C64>::identity(g.nrows(), g.ncols());
        (g - id).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Push the flag forward by `a` (keeps nesting).
    pub fn transform(&self, a: &MatC) -> Flag {
        Flag {
            dims: self.dims.clone(),
            frame: orthonormalize(&(&a.0 * &self.frame)),
        }
    }
}

/// Orthogonal projector onto the column span of an orthonormal `basis`.
pub fn projector(basis: &DMatrix<C64>) -> DMatrix<C64> {
    basis * basis.adjoint()
}

/// Largest principal angle between the spans of two orthonormal bases. When
/// `u` has fewer columns this is the angle by which span `u` fails to lie in
/// span `v`.
pub fn principal_angle(u: &DMatrix<C64>, v: &DMatrix<C64>) -> f64 {
    assert!(u.ncols() <= v.ncols(), "principal_angle: {} > {} columns", u.ncols(), v.ncols());
    if u.ncols() == 0 {
        return 0.0;
    }
    // sin of the largest angle, accurate for small angles unlike acos
    let resid = u - v * (v.adjoint() * u);
    let top = resid.singular_values().iter().cloned().fold(0.0, f64::max);
    top.min(1.0).asin()
}

/// Nested spans of the top-k eigenvectors for each `k` in `ks`.
pub fn attracting_flag(a: &MatC, ks: &[usize]) -> Result<Flag> {
    attracting_flag_with(a, ks, GAP_TOL)
}

pub fn attracting_flag_with(a: &MatC, ks: &[usize], gap_tol: f64) -> Result<Flag> {
    let d = a.dim();
    let mut dims: Vec<usize> = ks.iter().cloned().filter(|&k| k > 0 && k < d).collect();
    dims.sort_unstable();
    dims.dedup();
    let eig = eigen_by_modulus_with(a, gap_tol)?;
    let moduli = eig.moduli();
    for &k in &dims {
        let rel = relative_gap(moduli[k - 1], moduli[k]);
        if rel < gap_tol {
            return Err(Error::InsufficientGap { k, rel_gap: rel });
        }
    }
    let m = dims.last().cloned().unwrap_or(0);
    let frame = orthonormalize(&eig.vectors.columns(0, m).into_owned());
    Ok(Flag { dims, frame })
}

/// Intersection of two subspaces given by orthonormal bases, computed as
/// the null space of the stacked complement. Returns a basis of the
/// intersection inside span(`u`).
pub fn intersect(u: &DMatrix<C64>, v: &DMatrix<C64>) -> DMatrix<C64> {
    let d = u.nrows();
    let pv = DMatrix::<C64>::identity(d, d) - projector(v);
    let m = pv * u;
    let (sv, vecs) = svd_right(&m);
    // Relative to the top singular value: near-coincident subspaces have all
    // singular values small (powers of their separation), and an absolute
    // floor would merge the genuinely nonzero ones into the null space.
    let top = sv.first().cloned().unwrap_or(0.0);
    let null: Vec<usize> = if top <= RANK_TOL {
        (0..u.ncols()).collect()
    } else {
        (0..u.ncols()).filter(|&i| sv[i] <= RANK_TOL * top).collect()
    };
    let coeffs = DMatrix::from_fn(u.ncols(), null.len(), |r, c| vecs[(r, null[c])]);
    orthonormalize(&(u * coeffs))
}

/// All `k`-element subsets of `0..d` in lexicographic order.
pub fn k_subsets(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > d {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < d - k + i {
                break;
            }
        }
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Matrix of the induced action on the `k`-th exterior power, in the basis of
/// wedge products indexed by [`k_subsets`].
pub fn exterior_power(a: &MatC, k: usize) -> MatC {
    let subsets = k_subsets(a.dim(), k);
    let n = subsets.len();
    let mut out = DMatrix::<C64>::zeros(n, n);
    for (r, rows) in subsets.iter().enumerate() {
        for (c, cols) in subsets.iter().enumerate() {
            let minor = DMatrix::from_fn(k, k, |i, j| a.0[(rows[i], cols[j])]);
            out[(r, c)] = minor.determinant();
        }
    }
    MatC(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    pub(crate) fn random_matrix(rng: &mut ChaCha8Rng, d: usize) -> MatC {
        MatC::from_fn(d, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn exterior_power_is_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 5);
        let b = random_matrix(&mut rng, 5);
        assert_eq!(k_subsets(5, 2).len(), 10);
        for k in 1..5 {
            let lhs = exterior_power(&a.mul(&b), k);
            let rhs = exterior_power(&a, k).mul(&exterior_power(&b, k));
            assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }
        let top = exterior_power(&a, 5).get(0, 0);
        assert!((top - a.det()).norm() < 1e-12);
    }

    #[test]
    fn diagonal_eigenvalues() {
        let a = MatC::diag(&[c(3.0, 0.0), c(0.0, 2.0), c(1.0, 0.0)]);
        let e = eigen_by_modulus(&a).unwrap();
        let expect = [c(3.0, 0.0), c(0.0, 2.0), c(1.0, 0.0)];
        for (x, y) in e.values.iter().zip(expect.iter()) {
            assert!((x - y).norm() < 1e-12);
        }
        assert!(!e.tie_warning());
        assert!(e.residuals.iter().all(|&r| r < 1e-8));
    }

    #[test]
    fn identity_sets_tie_warning() {
        let e = eigen_by_modulus(&MatC::identity(4)).unwrap();
        assert!(e.tie_warning());
        assert!(e.values.iter().all(|z| (z - c(1.0, 0.0)).norm() < 1e-12));
        // Independent eigenvectors even for a repeated eigenvalue.
        assert!(e.vectors.clone().determinant().norm() > 0.5);
    }

    #[test]
    fn ties_broken_by_argument() {
        let a = MatC::diag(&[c(0.0, 1.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, -1.0)]);
        let e = eigen_by_modulus(&a).unwrap();
        let args: Vec<f64> = e.values.iter().map(|z| z.arg()).collect();
        assert!(args.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(e.ties, vec![0, 1, 2]);
    }

    #[test]
    fn recovers_conjugated_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let diag = [4.0, 3.0, 2.0, 1.0, 1.0 / 24.0];
        let p = random_matrix(&mut rng, 5);
        let d = MatC::diag(&diag.map(|x| c(x, 0.0)));
        let a = d.conjugate_by(&p).unwrap();
        let e = eigen_by_modulus(&a).unwrap();
        for (x, y) in e.values.iter().zip(diag.iter()) {
            assert!((x - c(*y, 0.0)).norm() < 1e-7, "{x} vs {y}");
        }
        assert!(e.residuals.iter().all(|&r| r < 1e-8));
        let prod: C64 = e.values.iter().product();
        assert!((prod - a.det()).norm() < 1e-6);
    }

    #[test]
    fn charpoly_matches_schur_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 2..=4 {
            for _ in 0..20 {
                let a = random_matrix(&mut rng, d);
                let e = eigen_by_modulus(&a).unwrap();
                assert!(e.crosscheck.unwrap() < 1e-9, "d={d} dev={:?}", e.crosscheck);
            }
        }
    }

    #[test]
    fn attracting_flag_diagonal() {
        let a = MatC::diag(&[c(3.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]);
        let f = attracting_flag(&a, &[1, 2]).unwrap();
        let e1 = DMatrix::from_column_slice(3, 1, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(principal_angle(&f.subspace(1), &e1) < 1e-12);
        let e12 = DMatrix::from_fn(3, 2, |i, j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) });
        assert!(principal_angle(&f.subspace(2), &e12) < 1e-12);
    }

    #[test]
    fn attracting_flag_matches_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_matrix(&mut rng, 3);
        let a = MatC::diag(&[c(3.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)])
            .conjugate_by(&p)
            .unwrap();
        let f = attracting_flag(&a, &[1, 2]).unwrap();
        // Invariance.
        for k in [1, 2] {
            let b = f.subspace(k);
            let pk = projector(&b);
            let resid = (DMatrix::<C64>::identity(3, 3) - &pk) * &a.0 * &pk;
            assert!(resid.norm() < 1e-8);
        }
        // Subspace iteration oracle.
        for k in [1, 2] {
            let mut frame = DMatrix::from_fn(3, k, |_, _| c(rng.random_range(-1.0..1.0), 0.3));
            for _ in 0..60 {
                frame = orthonormalize(&(&a.0 * &frame));
            }
            assert!(principal_angle(&frame, &f.subspace(k)) < 1e-6);
        }
    }

    #[test]
    fn attracting_flag_rejects_ties() {
        let a = MatC::diag(&[c(2.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.5, 0.0)]);
        assert!(attracting_flag(&a, &[1]).is_ok());
        match attracting_flag(&a, &[2]) {
            Err(Error::InsufficientGap { k: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        // The 3-plane is still defined across the tie.
        assert!(attracting_flag(&a, &[1, 3]).is_ok());
    }

    #[test]
    fn symmetric_space_length_exact() {
        let e = std::f64::consts::E;
        let a = MatC::diag(&[c(e, 0.0), c(1.0 / e, 0.0)]);
        assert!((symmetric_space_length(&a).unwrap() - 2f64.sqrt()).abs() < 1e-12);
        let b = MatC::diag(&[c(e * e, 0.0), c(1.0, 0.0), c(1.0 / (e * e), 0.0)]);
        assert!((symmetric_space_length(&b).unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn intersection_of_planes() {
        // span(e1,e2) and span(e2,e3) in C^3 meet in span(e2).
        let u = DMatrix::from_fn(3, 2, |i, j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let v = DMatrix::from_fn(3, 2, |i, j| if i == j + 1 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let w = intersect(&u, &v);
        assert_eq!(w.ncols(), 1);
        assert!((w[(1, 0)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn polynomial_roots_known() {
        // (x-1)(x-2)(x+3) = x^3 - 7x + 6
        let coeffs = [c(6.0, 0.0), c(-7.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let mut roots = polynomial_roots(&coeffs).unwrap();
        roots.sort_by(|a, b| a.re.total_cmp(&b.re));
        for (r, e) in roots.iter().zip([-3.0, 1.0, 2.0]) {
            assert!((r - c(e, 0.0)).norm() < 1e-12);
        }
    }
}

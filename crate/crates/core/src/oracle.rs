//! Brute-force conjugacy-class counter, used to cross-check the catalog.
//!
//! Shares only the group construction with [`ClassCatalog`](crate::surface::ClassCatalog):
//! candidates come from a plain breadth-first ball of words and are merged by
//! explicit conjugation with a union-find, with no axis walking or geometric
//! canonical form.

use crate::error::{Error, Result};
use crate::surface::{octagon_circumradius, word_cap, FuchsianRep, Letter, Mat2};
use std::collections::HashSet;

#[derive(Clone, Debug)]
pub struct BruteCount {
    pub radius: f64,
    pub word_cap: usize,
    pub candidates: usize,
    pub classes: usize,
    pub non_primitive: usize,
}

struct Uf(Vec<usize>);

impl Uf {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Every element reachable by words of length at most `cap` that stays inside
/// the ball `cosh d(i, g i) <= cosh_max` along the way.
fn ball(rep: &FuchsianRep, cap: usize, cosh_max: f64, max_elements: usize) -> Result<Vec<Mat2>> {
    let quantum = 1e-5;
    let mut seen: HashSet<[i64; 4]> = HashSet::new();
    seen.insert(Mat2::IDENTITY.key(quantum));
    let mut all = vec![Mat2::IDENTITY];
    let mut layer = vec![Mat2::IDENTITY];
    for _ in 0..cap {
        let mut next = Vec::new();
        for g in &layer {
            for l in Letter::ALL {
                let h = g.mul(&rep.gen(l));
                if h.cosh_displacement() > cosh_max || !seen.insert(h.key(quantum)) {
                    continue;
                }
                next.push(h);
            }
        }
        if next.is_empty() {
            break;
        }
        all.extend_from_slice(&next);
        if all.len() > max_elements {
            return Err(Error::BudgetExceeded(format!("brute ball exceeded {max_elements} elements")));
        }
        layer = next;
    }
    Ok(all)
}

/// Candidate table sorted by trace, for tolerant lookups of a matrix up to sign.
struct Table {
    mats: Vec<Mat2>,
    traces: Vec<f64>,
}

impl Table {
    fn new(mut mats: Vec<Mat2>) -> Table {
        for m in mats.iter_mut() {
            if m.trace() < 0.0 {
                *m = m.neg();
            }
        }
        mats.sort_by(|x, y| x.trace().total_cmp(&y.trace()));
        let traces = mats.iter().map(|m| m.trace()).collect();
        Table { mats, traces }
    }

    fn find(&self, g: &Mat2) -> Option<usize> {
        let g = if g.trace() < 0.0 { g.neg() } else { *g };
        let t = g.trace();
        let scale = 1.0 + g.max_abs_diff(&Mat2::new(0.0, 0.0, 0.0, 0.0));
        let tol = 1e-7 * scale;
        let lo = self.traces.partition_point(|&x| x < t - tol);
        (lo..self.traces.len())
            .take_while(|&i| self.traces[i] <= t + tol)
            .find(|&i| self.mats[i].max_abs_diff(&g) <= tol)
    }
}

/// Number of primitive conjugacy classes with translation length at most
/// `radius`, found without any geometric normal form.
///
/// Each class with length `l <= radius` has a representative whose axis passes
/// within the circumradius `r_F` of the base point, and any two such
/// representatives are conjugate by an element moving the base point at most
/// `2 r_F + l / 2`.
pub fn brute_force_count(rep: &FuchsianRep, radius: f64, max_elements: usize) -> Result<BruteCount> {
    let cap = word_cap(rep, radius);
    let r_f = octagon_circumradius();
    let half_trace = (0.5 * radius).cosh();
    let elems = ball(rep, cap, (radius + 2.0 * r_f).cosh(), max_elements)?;

    let candidates: Vec<Mat2> = elems
        .iter()
        .filter(|g| {
            let ht = 0.5 * g.trace().abs();
            if ht <= 1.0 || ht > half_trace * (1.0 + 1e-12) {
                return false;
            }
            // cosh of the distance from i to the axis
            let sinh_half_l = (ht * ht - 1.0).sqrt();
            let sinh_half_disp = (0.5 * (g.cosh_displacement() - 1.0)).max(0.0).sqrt();
            sinh_half_disp <= r_f.cosh() * sinh_half_l * (1.0 + 1e-9)
        })
        .copied()
        .collect();
    let table = Table::new(candidates);
    let n = table.mats.len();

    let conj_radius = 2.0 * r_f + 0.5 * radius + 0.1;
    let conjugators: Vec<Mat2> = elems
        .iter()
        .filter(|c| c.cosh_displacement() <= conj_radius.cosh())
        .copied()
        .collect();

    let mut uf = Uf((0..n).collect());
    for i in 0..n {
        let g = table.mats[i];
        for c in &conjugators {
            let h = c.mul(&g).mul(&c.inv());
            if let Some(j) = table.find(&h) {
                uf.union(i, j);
            }
        }
    }

    let mut power = vec![false; n];
    for i in 0..n {
        let g = table.mats[i];
        let ell = 2.0 * (0.5 * g.trace().abs()).acosh();
        let mut p = g;
        for _ in 2..=((radius / ell).floor() as usize).max(1) {
            p = p.mul(&g);
            if let Some(j) = table.find(&p) {
                power[j] = true;
            }
        }
    }

    let mut roots = HashSet::new();
    let mut bad = HashSet::new();
    for i in 0..n {
        let r = uf.find(i);
        roots.insert(r);
        if power[i] {
            bad.insert(r);
        }
    }
    Ok(BruteCount {
        radius,
        word_cap: cap,
        candidates: n,
        classes: roots.len() - bad.len(),
        non_primitive: bad.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{fuchsian_reference, ClassCatalog};

    #[test]
    fn matches_catalog_small_radius() {
        let rep = fuchsian_reference().unwrap();
        for r in [3.5, 4.5] {
            let b = brute_force_count(&rep, r, 5_000_000).unwrap();
            let cat = ClassCatalog::enumerate(&rep, r).unwrap();
            assert_eq!(b.classes, cat.len(), "radius {r}");
        }
    }
}

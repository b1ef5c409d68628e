//! Root entropies by class counting, length comparison, and box-counting
//! dimension.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::rep::{gap, LinearRep};
use crate::surface::{ClassCatalog, ConjClass, FuchsianRep, Word};

/// Ordinary least-squares line `y = a + b x`; returns `(b, stderr(b), a)`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rss: f64 = x.iter().zip(y).map(|(u, v)| (v - a - b * u).powi(2)).sum();
    let se = if x.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (b, se, a)
}

/// Radii `lo, lo + step, ..., hi`.
pub fn even_radii(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let step = (hi - lo) / (count - 1) as f64;
    (0..count).map(|i| lo + step * i as f64).collect()
}

pub const WINDOW_POINTS: usize = 11;

#[derive(Clone, Debug, Serialize)]
pub struct EntropyFit {
    pub k: usize,
    pub radii: Vec<f64>,
    pub counts: Vec<u64>,
    pub slope: f64,
    pub slope_stderr: f64,
    pub window: (f64, f64),
    /// Classes enumerated up to this reference length.
    pub enumerated_length: f64,
    pub length_constant: f64,
    /// Classes whose gap could not be computed.
    pub skipped: usize,
    pub primitive_only: bool,
}

fn check_window(window: (f64, f64), r_max: f64) -> Result<()> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo && hi <= r_max + 1e-12) {
        return Err(Error::Config(format!("window {lo}:{hi} must satisfy 0 < lo < hi <= rmax = {r_max}")));
    }
    Ok(())
}

/// Counts of a sorted list of values at each radius.
fn counts_at(sorted: &[f64], radii: &[f64]) -> Vec<u64> {
    radii
        .iter()
        .map(|&r| sorted.partition_point(|&v| v <= r) as u64)
        .collect()
}

/// Fit `log N(R)` against `R` on evenly spaced radii of `window`.
pub fn fit_counts(values: &[f64], window: (f64, f64)) -> Result<(Vec<f64>, Vec<u64>, f64, f64)> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let radii = even_radii(window.0, window.1, WINDOW_POINTS);
    let counts = counts_at(&sorted, &radii);
    if counts[0] == 0 {
        return Err(Error::TooFewPoints { got: 0, need: 1 });
    }
    let logs: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let (slope, se, _) = ols(&radii, &logs);
    Ok((radii, counts, slope, se))
}

/// `max(l / log|L^k|, log|L^k| / l)` over classes, where `l` is the reference
/// length.
pub fn length_comparison(rep: &LinearRep, k: usize, classes: &[ConjClass]) -> Result<f64> {
    if classes.is_empty() {
        return Err(Error::TooFewPoints { got: 0, need: 1 });
    }
    let ratios: Result<Vec<f64>> = classes
        .par_iter()
        .map(|c| {
            let l = gap(rep, &c.rep_word, k)?.norm().ln();
            Ok((c.length / l).max(l / c.length))
        })
        .collect();
    Ok(ratios?.into_iter().fold(1.0, f64::max))
}

/// Classes used to estimate the length constant before enumeration.
pub const CALIBRATION_LENGTH: f64 = 8.0;

/// The `k`-th root entropy fitted on `window`, counting primitive classes with
/// `log|L^k| <= R`.
///
/// Classes are enumerated up to reference length `K r_max`, where `K` is the
/// length-comparison constant measured on classes of length at most
/// [`CALIBRATION_LENGTH`].
pub fn root_entropy(
    rep: &LinearRep,
    rep0: &FuchsianRep,
    k: usize,
    r_max: f64,
    window: (f64, f64),
) -> Result<EntropyFit> {
    check_window(window, r_max)?;
    if k == 0 || k >= rep.d {
        return Err(Error::DimensionMismatch(format!("k = {k} outside 1..{}", rep.d - 1)));
    }
    let calib = ClassCatalog::enumerate(rep0, CALIBRATION_LENGTH.min(r_max))?;
    let constant = length_comparison(rep, k, &calib.classes)?;
    let reach = constant * r_max;
    let cat = if reach <= CALIBRATION_LENGTH { calib } else { ClassCatalog::enumerate(rep0, reach)? };
    let logs: Vec<Option<f64>> = cat
        .classes
        .par_iter()
        .map(|c| gap(rep, &c.rep_word, k).ok().map(|l| l.norm().ln()))
        .collect();
    let skipped = logs.iter().filter(|v| v.is_none()).count();
    let values: Vec<f64> = logs.into_iter().flatten().collect();
    let (radii, counts, slope, slope_stderr) = fit_counts(&values, window)?;
    Ok(EntropyFit {
        k,
        radii,
        counts,
        slope,
        slope_stderr,
        window,
        enumerated_length: reach,
        length_constant: constant,
        skipped,
        primitive_only: true,
    })
}

/// Root entropy of the reference group itself, counting reference lengths.
pub fn fuchsian_entropy(rep0: &FuchsianRep, window: (f64, f64)) -> Result<EntropyFit> {
    let cat = ClassCatalog::enumerate(rep0, window.1)?;
    let values: Vec<f64> = cat.classes.iter().map(|c| c.length).collect();
    let (radii, counts, slope, slope_stderr) = fit_counts(&values, window)?;
    Ok(EntropyFit {
        k: 1,
        radii,
        counts,
        slope,
        slope_stderr,
        window,
        enumerated_length: window.1,
        length_constant: 1.0,
        skipped: 0,
        primitive_only: true,
    })
}

// ----- Box counting -----

#[derive(Clone, Debug, Serialize)]
pub struct DimFit {
    /// Box sides, decreasing.
    pub scales: Vec<f64>,
    /// Occupied boxes, averaged over grid offsets and rounded.
    pub box_counts: Vec<u64>,
    pub slope: f64,
    pub slope_stderr: f64,
    /// Residuals of the fit of `log N` against `log(1/eps)`.
    pub residuals: Vec<f64>,
}

pub const MIN_BOX_POINTS: usize = 10_000;
pub const GRID_OFFSETS: usize = 4;
pub const BOX_SCALES: usize = 12;

/// Largest coordinate extent of the point set.
pub fn diameter(points: &[[f64; 2]]) -> f64 {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for i in 0..2 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    (hi[0] - lo[0]).max(hi[1] - lo[1])
}

/// Box-counting dimension over geometric scales from `scale_range.1` down to
/// `scale_range.0`, each count averaged over seeded random grid offsets.
pub fn box_dimension(points: &[[f64; 2]], scale_range: (f64, f64), seed: u64) -> Result<DimFit> {
    if points.len() < MIN_BOX_POINTS {
        return Err(Error::TooFewPoints { got: points.len(), need: MIN_BOX_POINTS });
    }
    if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::DegenerateInput("non-finite point".into()));
    }
    let diam = diameter(points);
    let (small, large) = scale_range;
    let tol = 1e-9 * diam;
    if !(small > 0.0 && small < large && small >= diam / 1e3 - tol && large <= diam / 10.0 + tol) {
        return Err(Error::Config(format!(
            "scales {small}..{large} must lie within [{}, {}]",
            diam / 1e3,
            diam / 10.0
        )));
    }
    let ratio = (small / large).powf(1.0 / (BOX_SCALES - 1) as f64);
    let scales: Vec<f64> = (0..BOX_SCALES).map(|i| large * ratio.powi(i as i32)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offsets: Vec<[f64; 2]> = (0..GRID_OFFSETS).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    let means: Vec<f64> = scales
        .par_iter()
        .map(|&eps| {
            let total: usize = offsets
                .iter()
                .map(|off| {
                    let boxes: HashSet<(i64, i64)> = points
                        .iter()
                        .map(|p| {
                            (
                                ((p[0] / eps) + off[0]).floor() as i64,
                                ((p[1] / eps) + off[1]).floor() as i64,
                            )
                        })
                        .collect();
                    boxes.len()
                })
                .sum();
            total as f64 / GRID_OFFSETS as f64
        })
        .collect();
    let x: Vec<f64> = scales.iter().map(|e| -e.ln()).collect();
    let y: Vec<f64> = means.iter().map(|n| n.ln()).collect();
    let (slope, slope_stderr, intercept) = ols(&x, &y);
    let residuals = x.iter().zip(&y).map(|(a, b)| b - intercept - slope * a).collect();
    Ok(DimFit {
        scales,
        box_counts: means.iter().map(|m| m.round() as u64).collect(),
        slope,
        slope_stderr,
        residuals,
    })
}

/// Box counting over `[diam/100, diam/10]`. Boundary samples from a ball of
/// group elements leave gaps of a few hundredths of the diameter, so finer
/// scales undercount.
pub fn box_dimension_default(points: &[[f64; 2]], seed: u64) -> Result<DimFit> {
    let diam = diameter(points);
    box_dimension(points, (diam / 100.0, diam / 10.0), seed)
}

pub fn circle_points(n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            [t.cos(), t.sin()]
        })
        .collect()
}

pub fn segment_points(n: usize) -> Vec<[f64; 2]> {
    (0..n).map(|i| {
        let t = i as f64 / (n - 1) as f64;
        [t, 0.5 * t]
    }).collect()
}

/// Vertices of the von Koch curve on the unit segment at the given depth,
/// with `samples` points per edge.
pub fn koch_points(depth: u32, samples: usize) -> Vec<[f64; 2]> {
    let mut pts = vec![[0.0, 0.0], [1.0, 0.0]];
    let (s, c) = (std::f64::consts::FRAC_PI_3.sin(), std::f64::consts::FRAC_PI_3.cos());
    for _ in 0..depth {
        let mut next = Vec::with_capacity(4 * pts.len());
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let d = [(b[0] - a[0]) / 3.0, (b[1] - a[1]) / 3.0];
            let p1 = [a[0] + d[0], a[1] + d[1]];
            let p3 = [a[0] + 2.0 * d[0], a[1] + 2.0 * d[1]];
            let p2 = [p1[0] + c * d[0] - s * d[1], p1[1] + s * d[0] + c * d[1]];
            next.extend_from_slice(&[a, p1, p2, p3]);
        }
        next.push(*pts.last().expect("nonempty"));
        pts = next;
    }
    if samples <= 1 {
        return pts;
    }
    let mut out = Vec::with_capacity(pts.len() * samples);
    for w in pts.windows(2) {
        for j in 0..samples {
            let t = j as f64 / samples as f64;
            out.push([w[0][0] + t * (w[1][0] - w[0][0]), w[0][1] + t * (w[1][1] - w[0][1])]);
        }
    }
    out.push(*pts.last().expect("nonempty"));
    out
}

/// Words of the reference ball, used as a dense sample of the boundary.
pub fn dense_words(rep0: &FuchsianRep, count: usize) -> Vec<Word> {
    crate::surface::ball_words(rep0, count)
}

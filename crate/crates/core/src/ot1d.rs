//! One-dimensional optimal transport.
//!
//! In 1D the optimal map for a convex cost is the increasing rearrangement
//! `G^-1 o F`. Two estimators are provided: exact quantile matching on sorted
//! samples, and matching of cumulative histograms. [`nw_smooth`] then
//! regularizes either map with a Gaussian Nadaraya-Watson average.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Kernel weights are dropped once the exponent exceeds `CUTOFF^2 / 2`,
/// i.e. relative weight below `exp(-50)`.
const NW_CUTOFF: f64 = 10.0;

/// Large inputs are smoothed on a regular grid of spacing `h * NW_GRID_STEP`
/// after linear binning, with kernel taps reaching `NW_GRID_REACH * h`.
const NW_GRID_STEP: f64 = 1.0 / 16.0;
const NW_GRID_REACH: f64 = 8.0;
/// Smallest sample count for the binned path.
const NW_BINNED_MIN: usize = 512;

/// Mass added to every histogram bin so cumulative histograms are strictly
/// increasing and therefore invertible.
const HISTOGRAM_EPS: f64 = 1e-9;

/// Monotone piecewise-linear map sampled at sorted abscissae.
///
/// Queries inside the abscissa range interpolate linearly; outside it the end
/// ordinates are held constant.
#[derive(Debug, Clone, PartialEq)]
pub struct Transfer1D {
    abscissae: Vec<f64>,
    ordinates: Vec<f64>,
}

impl Transfer1D {
    pub fn new(abscissae: Vec<f64>, ordinates: Vec<f64>) -> Result<Self> {
        if abscissae.is_empty() || abscissae.len() != ordinates.len() {
            return Err(Error::InvalidInput(format!(
                "need matching non-empty abscissae and ordinates, got {} and {}",
                abscissae.len(),
                ordinates.len()
            )));
        }
        check_finite(&abscissae)?;
        check_finite(&ordinates)?;
        if !is_sorted(&abscissae) || !is_sorted(&ordinates) {
            return Err(Error::InvalidInput(
                "abscissae and ordinates must both be nondecreasing".into(),
            ));
        }
        Ok(Self {
            abscissae,
            ordinates,
        })
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.abscissae
    }

    pub fn ordinates(&self) -> &[f64] {
        &self.ordinates
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (xs, ys) = (&self.abscissae, &self.ordinates);
        let j = xs.partition_point(|&a| a <= x);
        if j == 0 {
            return ys[0];
        }
        if j == xs.len() {
            return ys[j - 1];
        }
        let (x0, x1, y0, y1) = (xs[j - 1], xs[j], ys[j - 1], ys[j]);
        let t = (x - x0) / (x1 - x0);
        (y0 + t * (y1 - y0)).clamp(y0, y1)
    }

    pub fn eval_many(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.eval(x)).collect()
    }
}

fn is_sorted(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] <= w[1])
}

fn check_finite(v: &[f64]) -> Result<()> {
    match v.iter().find(|x| !x.is_finite()) {
        Some(bad) => Err(Error::InvalidInput(format!("non-finite sample {bad}"))),
        None => Ok(()),
    }
}

fn check_samples(v: &[f64], what: &str) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidInput(format!("{what} samples are empty")));
    }
    check_finite(v)
}

/// Indices that sort `values` ascending; ties keep their original order.
pub fn argsort(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    idx
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Target quantile for each of `n` source ranks, levels `(i + 0.5) / n`,
/// interpolating the sorted target at levels `(j + 0.5) / m`.
fn rank_quantiles(n: usize, sorted_tgt: &[f64]) -> Vec<f64> {
    let m = sorted_tgt.len();
    if n == m {
        return sorted_tgt.to_vec();
    }
    (0..n)
        .map(|i| {
            let q = ((2 * i + 1) * m) as f64 / (2 * n) as f64 - 0.5;
            if q <= 0.0 {
                return sorted_tgt[0];
            }
            let j = q.floor() as usize;
            if j >= m - 1 {
                return sorted_tgt[m - 1];
            }
            let (a, b) = (sorted_tgt[j], sorted_tgt[j + 1]);
            (a + (q - j as f64) * (b - a)).clamp(a, b)
        })
        .collect()
}

/// Sort-based matching of each source sample to its target quantile.
///
/// Returns the stable sorting permutation of `src` and, for each rank, the
/// target value assigned to it. Unlike evaluating a [`Transfer1D`], tied
/// source samples keep distinct assignments.
pub fn quantile_assignment(src: &[f64], tgt: &[f64]) -> Result<(Vec<usize>, Vec<f64>)> {
    check_samples(src, "source")?;
    check_samples(tgt, "target")?;
    let order = argsort(src);
    let mapped = rank_quantiles(src.len(), &sorted(tgt));
    Ok((order, mapped))
}

/// Increasing rearrangement by quantile matching of sorted samples.
pub fn solve_1d_quantile(src: &[f64], tgt: &[f64]) -> Result<Transfer1D> {
    let (order, mapped) = quantile_assignment(src, tgt)?;
    let abscissae = order.iter().map(|&i| src[i]).collect();
    Ok(Transfer1D {
        abscissae,
        ordinates: mapped,
    })
}

/// Cumulative mass at each of the `bins + 1` bin edges, normalized to end at 1.
fn cumulative_edges(samples: &[f64], lo: f64, width: f64, bins: usize) -> Vec<f64> {
    let mut mass = vec![HISTOGRAM_EPS; bins];
    for &x in samples {
        let b = (((x - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        mass[b] += 1.0;
    }
    let total: f64 = mass.iter().sum();
    let mut edges = Vec::with_capacity(bins + 1);
    let mut acc = 0.0;
    edges.push(0.0);
    for m in &mass {
        acc += m;
        edges.push(acc / total);
    }
    edges[bins] = 1.0;
    edges
}

/// Increasing rearrangement by matching cumulative histograms.
///
/// Both sample sets are binned over their joint range. The map at each source
/// bin centre `c` is `G^-1(F(c))`, with `F` and `G` the piecewise-linear
/// cumulative histograms, clamped to the target's sample range. The two ends
/// of the joint range map to the target minimum and maximum.
pub fn solve_1d_histogram(src: &[f64], tgt: &[f64], bins: usize) -> Result<Transfer1D> {
    if bins < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 bins, got {bins}"
        )));
    }
    check_samples(src, "source")?;
    check_samples(tgt, "target")?;

    let (tgt_min, tgt_max) = min_max(tgt);
    let (src_min, src_max) = min_max(src);
    let (lo, hi) = (src_min.min(tgt_min), src_max.max(tgt_max));
    if lo == hi {
        return Ok(Transfer1D {
            abscissae: vec![lo],
            ordinates: vec![tgt_min],
        });
    }

    let width = (hi - lo) / bins as f64;
    let centres: Vec<f64> = (0..bins).map(|k| lo + (k as f64 + 0.5) * width).collect();
    if tgt_min == tgt_max {
        return Ok(Transfer1D {
            abscissae: centres,
            ordinates: vec![tgt_min; bins],
        });
    }

    let f_edges = cumulative_edges(src, lo, width, bins);
    let g_edges = cumulative_edges(tgt, lo, width, bins);
    let inverse_g = |p: f64| -> f64 {
        let j = g_edges[1..].partition_point(|&g| g < p).min(bins - 1);
        let (g0, g1) = (g_edges[j], g_edges[j + 1]);
        let e0 = lo + j as f64 * width;
        let x = e0 + (p - g0) / (g1 - g0) * width;
        x.clamp(e0, e0 + width).clamp(tgt_min, tgt_max)
    };

    // The joint range endpoints are pinned to the target extremes so samples
    // outside the outermost centres are not held at a half-bin estimate.
    let mut abscissae = Vec::with_capacity(bins + 2);
    let mut ordinates = Vec::with_capacity(bins + 2);
    abscissae.push(lo);
    ordinates.push(tgt_min);
    for (k, &c) in centres.iter().enumerate() {
        abscissae.push(c);
        ordinates.push(inverse_g(0.5 * (f_edges[k] + f_edges[k + 1])));
    }
    abscissae.push(hi);
    ordinates.push(tgt_max);
    // Rounding in the bin-edge arithmetic can break ties the wrong way.
    for k in 1..ordinates.len() {
        if ordinates[k] < ordinates[k - 1] {
            ordinates[k] = ordinates[k - 1];
        }
    }
    Ok(Transfer1D {
        abscissae,
        ordinates,
    })
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

/// Gaussian Nadaraya-Watson regression of `ordinates` on `abscissae`,
/// evaluated at each query point.
///
/// Weights are taken relative to the nearest abscissa, so a query far from
/// every sample degrades to the nearest sample's ordinate instead of `0/0`.
/// From 512 samples on, the sums are evaluated on a grid of spacing `h/16`
/// after linear binning, unless that grid would outnumber the samples
/// eightfold; queries the grid cannot answer fall back to the direct sum.
pub fn nw_smooth(
    abscissae: &[f64],
    ordinates: &[f64],
    h: f64,
    queries: &[f64],
) -> Result<Vec<f64>> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be > 0, got {h}"
        )));
    }
    if abscissae.is_empty() {
        return Err(Error::InvalidInput("no correspondences to smooth".into()));
    }
    if abscissae.len() != ordinates.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} abscissae vs {} ordinates",
            abscissae.len(),
            ordinates.len()
        )));
    }
    check_finite(abscissae)?;
    check_finite(ordinates)?;
    check_finite(queries)?;

    let order = argsort(abscissae);
    let xs: Vec<f64> = order.iter().map(|&i| abscissae[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| ordinates[i]).collect();
    let (y_min, y_max) = min_max(&ys);
    let two_h2 = 2.0 * h * h;

    let exact = |q: f64| -> f64 {
        let j = xs.partition_point(|&x| x < q);
        let mut d_min = f64::INFINITY;
        if j < xs.len() {
            d_min = xs[j] - q;
        }
        if j > 0 {
            d_min = d_min.min(q - xs[j - 1]);
        }
        let reach = d_min + NW_CUTOFF * h;
        let start = xs.partition_point(|&x| x < q - reach);
        let end = xs.partition_point(|&x| x <= q + reach);

        let (mut num, mut den) = (0.0, 0.0);
        for (x, y) in xs[start..end].iter().zip(&ys[start..end]) {
            let d = (x - q).abs();
            let w = if d <= d_min {
                1.0
            } else {
                (-(d - d_min) * (d + d_min) / two_h2).exp()
            };
            num += w * y;
            den += w;
        }
        num / den
    };

    let grid = BinnedGrid::build(&xs, &ys, h);
    Ok(queries
        .par_iter()
        .map(|&q| {
            let v = grid
                .as_ref()
                .and_then(|g| g.eval(q))
                .unwrap_or_else(|| exact(q));
            v.clamp(y_min, y_max)
        })
        .collect())
}

/// Kernel-smoothed ratio `num / den` sampled on a regular grid.
struct BinnedGrid {
    lo: f64,
    step: f64,
    ratio: Vec<Option<f64>>,
}

impl BinnedGrid {
    /// `None` when the grid would be finer than the data warrants.
    fn build(xs: &[f64], ys: &[f64], h: f64) -> Option<Self> {
        let n = xs.len();
        if n < NW_BINNED_MIN {
            return None;
        }
        let step = h * NW_GRID_STEP;
        let reach = (NW_GRID_REACH / NW_GRID_STEP) as usize;
        let lo = xs[0];
        let cells = ((xs[n - 1] - lo) / step).ceil();
        if !(cells.is_finite() && cells <= (8 * n) as f64) {
            return None;
        }
        let len = cells as usize + 2;

        let mut mass = vec![0.0; len];
        let mut moment = vec![0.0; len];
        for (x, y) in xs.iter().zip(ys) {
            let t = (x - lo) / step;
            let i = (t.floor() as usize).min(len - 2);
            let f = t - i as f64;
            mass[i] += 1.0 - f;
            mass[i + 1] += f;
            moment[i] += (1.0 - f) * y;
            moment[i + 1] += f * y;
        }

        let taps: Vec<f64> = (0..=reach)
            .map(|k| {
                let d = k as f64 * NW_GRID_STEP;
                (-0.5 * d * d).exp()
            })
            .collect();
        let ratio = (0..len)
            .into_par_iter()
            .map(|j| {
                let (mut num, mut den) = (0.0, 0.0);
                let start = j.saturating_sub(reach);
                let end = (j + reach + 1).min(len);
                for i in start..end {
                    let w = taps[i.abs_diff(j)];
                    num += w * moment[i];
                    den += w * mass[i];
                }
                (den > f64::MIN_POSITIVE).then(|| num / den)
            })
            .collect();
        Some(Self { lo, step, ratio })
    }

    fn eval(&self, q: f64) -> Option<f64> {
        let t = (q - self.lo) / self.step;
        if !(t >= 0.0 && t <= (self.ratio.len() - 1) as f64) {
            return None;
        }
        let i = (t.floor() as usize).min(self.ratio.len() - 2);
        let f = t - i as f64;
        let (a, b) = (self.ratio[i]?, self.ratio[i + 1]?);
        Some(a + f * (b - a))
    }
}

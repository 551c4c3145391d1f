//! Iterative projection engine for high-dimensional transport.
//!
//! Each iteration draws an orthonormal batch of random directions, solves the
//! 1D transport problem between the projected clouds along every direction,
//! optionally smooths each 1D map, and moves the source points by the sum of
//! the per-direction displacements.

use std::io::{self, Write};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::config::{Mode, SmoothTarget, TransferConfig};
use crate::error::{Error, Result};
use crate::ot1d::{nw_smooth, quantile_assignment, solve_1d_histogram, solve_1d_quantile};
use crate::patch_codec::FeatureCloud;
use crate::points::PointSet;

/// Columns whose norm falls below this fraction of their drawn norm during
/// orthogonalization are redrawn.
const DEGENERATE_COLUMN: f64 = 1e-6;

/// Mutually orthonormal unit directions in `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionBatch {
    dim: usize,
    vectors: Vec<Vec<f64>>,
}

impl DirectionBatch {
    pub fn new(dim: usize, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if vectors.is_empty() || vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "direction batch must hold at least one {dim}-vector"
            )));
        }
        Ok(Self { dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian random frame, orthonormalized by Gram-Schmidt with one
/// reorthogonalization pass.
pub fn sample_directions<R: Rng + ?Sized>(
    dim: usize,
    count: usize,
    rng: &mut R,
) -> Result<DirectionBatch> {
    if dim == 0 {
        return Err(Error::InvalidInput(
            "direction dimension must be >= 1".into(),
        ));
    }
    if count == 0 || count > dim {
        return Err(Error::InvalidInput(format!(
            "need 1..={dim} orthonormal directions, asked for {count}"
        )));
    }

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    while basis.len() < count {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let drawn = dot(&v, &v).sqrt();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm.is_nan() || norm <= DEGENERATE_COLUMN * drawn {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    DirectionBatch::new(dim, basis)
}

/// One record per iteration of [`run_sliced_transport`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationTrace {
    pub iteration: usize,
    /// Batch mean of the 1D squared Wasserstein distances, measured before
    /// the iteration's update.
    pub sliced_distance: f64,
    pub millis: f64,
}

pub fn write_trace_csv<W: Write>(trace: &[IterationTrace], mut out: W) -> io::Result<()> {
    writeln!(out, "iteration,sliced_distance,millis")?;
    for t in trace {
        writeln!(out, "{},{},{}", t.iteration, t.sliced_distance, t.millis)?;
    }
    Ok(())
}

/// Indices of a uniform subsample of `cap` out of `n`, or all of them.
fn fit_indices(n: usize, cap: usize) -> Option<Vec<usize>> {
    (n > cap).then(|| (0..cap).map(|i| i * n / cap).collect())
}

fn gather(values: &[f64], idx: &Option<Vec<usize>>) -> Vec<f64> {
    match idx {
        Some(idx) => idx.iter().map(|&i| values[i]).collect(),
        None => values.to_vec(),
    }
}

/// Exact quantile-matched squared 1D Wasserstein distance.
fn w2_squared(src: &[f64], tgt: &[f64]) -> Result<f64> {
    let (order, mapped) = quantile_assignment(src, tgt)?;
    let sum: f64 = order
        .iter()
        .zip(&mapped)
        .map(|(&i, y)| (y - src[i]).powi(2))
        .sum();
    Ok(sum / src.len() as f64)
}

/// Mapped value of every source projection along one direction, plus the
/// direction's squared 1D transport cost.
fn transport_along(
    src_proj: &[f64],
    tgt_proj: &[f64],
    cfg: &TransferConfig,
    smooth: bool,
) -> Result<(Vec<f64>, f64)> {
    let src_fit_idx = fit_indices(src_proj.len(), cfg.max_solve_samples);
    let tgt_fit_idx = fit_indices(tgt_proj.len(), cfg.max_solve_samples);
    let src_fit = gather(src_proj, &src_fit_idx);
    let tgt_fit = gather(tgt_proj, &tgt_fit_idx);

    let (order, ranked) = quantile_assignment(&src_fit, &tgt_fit)?;
    let cost = order
        .iter()
        .zip(&ranked)
        .map(|(&i, y)| (y - src_fit[i]).powi(2))
        .sum::<f64>()
        / src_fit.len() as f64;

    // Map evaluated at the fitting samples.
    let fit_mapped: Vec<f64> = match cfg.mode {
        Mode::Swd => {
            let mut m = vec![0.0; src_fit.len()];
            for (&i, &y) in order.iter().zip(&ranked) {
                m[i] = y;
            }
            m
        }
        Mode::Idt => {
            solve_1d_histogram(&src_fit, &tgt_fit, cfg.histogram_bins)?.eval_many(&src_fit)
        }
    };

    let mapped = if smooth {
        match cfg.nw_target {
            SmoothTarget::Map => nw_smooth(&src_fit, &fit_mapped, cfg.h, src_proj)?,
            SmoothTarget::Displacement => {
                let shift: Vec<f64> = fit_mapped
                    .iter()
                    .zip(&src_fit)
                    .map(|(m, x)| m - x)
                    .collect();
                let smoothed = nw_smooth(&src_fit, &shift, cfg.h, src_proj)?;
                smoothed.iter().zip(src_proj).map(|(d, x)| x + d).collect()
            }
        }
    } else if src_fit_idx.is_none() {
        fit_mapped
    } else {
        match cfg.mode {
            Mode::Swd => solve_1d_quantile(&src_fit, &tgt_fit)?.eval_many(src_proj),
            Mode::Idt => {
                solve_1d_histogram(&src_fit, &tgt_fit, cfg.histogram_bins)?.eval_many(src_proj)
            }
        }
    };
    Ok((mapped, cost))
}

/// Result of one [`sliced_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub points: PointSet,
    /// Batch mean of the squared 1D transport costs before the update.
    pub sliced_distance: f64,
}

fn check_clouds(src: &PointSet, tgt: &PointSet) -> Result<()> {
    if src.dim() != tgt.dim() {
        return Err(Error::DimensionMismatch(format!(
            "source dimension {} vs target dimension {}",
            src.dim(),
            tgt.dim()
        )));
    }
    if src.is_empty() || tgt.is_empty() {
        return Err(Error::InvalidInput(
            "cannot transport an empty cloud".into(),
        ));
    }
    Ok(())
}

/// Moves every source point by the sum over `batch` of its 1D displacement
/// along each direction. The batch is orthonormal, so this is the
/// displacement projected onto the span of the batch. Smoothing follows
/// `cfg.nw_enabled`.
pub fn sliced_step(
    src: &PointSet,
    tgt: &PointSet,
    batch: &DirectionBatch,
    cfg: &TransferConfig,
) -> Result<StepOutcome> {
    step_with(src, tgt, batch, cfg, cfg.nw_enabled)
}

fn step_with(
    src: &PointSet,
    tgt: &PointSet,
    batch: &DirectionBatch,
    cfg: &TransferConfig,
    smooth: bool,
) -> Result<StepOutcome> {
    check_clouds(src, tgt)?;
    if batch.dim() != src.dim() {
        return Err(Error::DimensionMismatch(format!(
            "directions live in R^{}, cloud in R^{}",
            batch.dim(),
            src.dim()
        )));
    }

    let per_direction: Vec<(Vec<f64>, f64)> = batch
        .vectors()
        .par_iter()
        .map(|theta| {
            let sp = src.project(theta);
            let tp = tgt.project(theta);
            let (mapped, cost) = transport_along(&sp, &tp, cfg, smooth)?;
            let shift = mapped.iter().zip(&sp).map(|(m, p)| m - p).collect();
            Ok((shift, cost))
        })
        .collect::<Result<_>>()?;

    let mut points = src.clone();
    let dim = points.dim();
    points
        .as_mut_slice()
        .par_chunks_mut(dim)
        .enumerate()
        .for_each(|(i, row)| {
            for (theta, (shift, _)) in batch.vectors().iter().zip(&per_direction) {
                let s = shift[i];
                row.iter_mut().zip(theta).for_each(|(x, t)| *x += s * t);
            }
        });

    let sliced_distance = per_direction.iter().map(|(_, c)| c).sum::<f64>() / batch.len() as f64;
    Ok(StepOutcome {
        points,
        sliced_distance,
    })
}

/// Monte-Carlo sliced squared Wasserstein distance over `directions` random
/// directions, drawn in orthonormal batches of at most `dim`.
pub fn sliced_distance<R: Rng + ?Sized>(
    a: &PointSet,
    b: &PointSet,
    directions: usize,
    rng: &mut R,
) -> Result<f64> {
    check_clouds(a, b)?;
    if directions == 0 {
        return Err(Error::InvalidInput("need at least one direction".into()));
    }
    let mut remaining = directions;
    let mut total = 0.0;
    while remaining > 0 {
        let batch = sample_directions(a.dim(), remaining.min(a.dim()), rng)?;
        for theta in batch.vectors() {
            total += w2_squared(&a.project(theta), &b.project(theta))?;
        }
        remaining -= batch.len();
    }
    Ok(total / directions as f64)
}

fn plateaued(trace: &[IterationTrace], window: usize, tol: f64) -> bool {
    if trace.len() < 2 * window {
        return false;
    }
    let mean =
        |s: &[IterationTrace]| s.iter().map(|t| t.sliced_distance).sum::<f64>() / window as f64;
    let recent = mean(&trace[trace.len() - window..]);
    let before = mean(&trace[trace.len() - 2 * window..trace.len() - window]);
    if before <= 0.0 {
        return true;
    }
    (before - recent) / before < tol
}

/// Runs up to `cfg.iterations` sliced steps on raw point sets.
pub fn transport_points(
    src: &PointSet,
    tgt: &PointSet,
    cfg: &TransferConfig,
) -> Result<(PointSet, Vec<IterationTrace>)> {
    cfg.validate()?;
    check_clouds(src, tgt)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let count = cfg.directions_per_iteration.min(src.dim());
    let mut current = src.clone();
    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut finishing = false;
    for t in 0..cfg.iterations {
        let started = Instant::now();
        let batch = sample_directions(src.dim(), count, &mut rng)?;
        let smooth = cfg.smooth_at(t) || (finishing && cfg.nw_enabled);
        let step = step_with(&current, tgt, &batch, cfg, smooth)?;
        current = step.points;
        trace.push(IterationTrace {
            iteration: t,
            sliced_distance: step.sliced_distance,
            millis: started.elapsed().as_secs_f64() * 1e3,
        });
        if finishing {
            break;
        }
        if plateaued(&trace, cfg.early_stop_window, cfg.early_stop_tol) {
            // A final-only smoothing pass still runs when the loop ends early.
            if cfg.nw_enabled && cfg.nw_final_only && !smooth {
                finishing = true;
                continue;
            }
            break;
        }
    }
    Ok((current, trace))
}

/// Transports the source patch cloud toward the target; the result keeps the
/// source geometry.
pub fn run_sliced_transport(
    src: &FeatureCloud,
    tgt: &FeatureCloud,
    cfg: &TransferConfig,
) -> Result<(FeatureCloud, Vec<IterationTrace>)> {
    let (points, trace) = transport_points(src.points(), tgt.points(), cfg)?;
    Ok((src.with_points(points)?, trace))
}

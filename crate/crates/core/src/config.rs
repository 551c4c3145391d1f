use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How each 1D transport problem is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Cumulative-histogram matching (iterative distribution transfer).
    Idt,
    /// Exact sort-based quantile matching (sliced Wasserstein).
    Swd,
}

/// What the Nadaraya-Watson estimator is fitted to along each direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothTarget {
    /// The displacement `phi(x) - x`; a zero displacement stays zero, so a
    /// cloud transported onto itself does not move.
    Displacement,
    /// The mapped value `phi(x)` itself. Also pulls samples toward dense
    /// regions, which denoises but moves even an already matched cloud.
    Map,
}

/// Every tunable of a transfer job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferConfig {
    /// Patch side length, odd.
    pub k: usize,
    /// Multiplier applied to normalized position coordinates.
    pub w_stretch: f64,
    /// Nadaraya-Watson bandwidth, in projected feature units.
    pub h: f64,
    pub mode: Mode,
    pub iterations: usize,
    pub directions_per_iteration: usize,
    /// Bin count for [`Mode::Idt`].
    pub histogram_bins: usize,
    pub seed: u64,
    pub nw_enabled: bool,
    pub nw_target: SmoothTarget,
    /// Smooth only during the last iteration instead of every iteration. An
    /// early stop appends one smoothed iteration.
    pub nw_final_only: bool,
    /// Early stopping compares the mean sliced distance of the last
    /// `early_stop_window` iterations with the window before it.
    pub early_stop_window: usize,
    pub early_stop_tol: f64,
    /// Above this many samples per cloud, 1D maps are fitted on a uniform
    /// subsample and then applied to every sample.
    pub max_solve_samples: usize,
}

impl Default for TransferConfig {
    fn default() -> Self {
        Self {
            k: 5,
            w_stretch: 10.0,
            h: 10.0,
            mode: Mode::Swd,
            iterations: 30,
            directions_per_iteration: 32,
            histogram_bins: 256,
            seed: 0,
            nw_enabled: true,
            nw_target: SmoothTarget::Displacement,
            nw_final_only: false,
            early_stop_window: 5,
            early_stop_tol: 1e-4,
            max_solve_samples: 500_000,
        }
    }
}

impl TransferConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k == 0 || self.k.is_multiple_of(2) {
            return fail(format!("patch size k must be odd and >= 1, got {}", self.k));
        }
        if !(self.w_stretch.is_finite() && self.w_stretch >= 0.0) {
            return fail(format!(
                "stretch must be finite and >= 0, got {}",
                self.w_stretch
            ));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return fail(format!(
                "bandwidth h must be finite and > 0, got {}",
                self.h
            ));
        }
        if self.iterations == 0 {
            return fail("iterations must be >= 1".into());
        }
        if self.directions_per_iteration == 0 {
            return fail("directions per iteration must be >= 1".into());
        }
        if self.histogram_bins < 2 {
            return fail(format!(
                "histogram bins must be >= 2, got {}",
                self.histogram_bins
            ));
        }
        if self.early_stop_window == 0 {
            return fail("early-stop window must be >= 1".into());
        }
        if !(self.early_stop_tol.is_finite() && self.early_stop_tol >= 0.0) {
            return fail(format!(
                "early-stop tolerance must be >= 0, got {}",
                self.early_stop_tol
            ));
        }
        if self.max_solve_samples < 2 {
            return fail("max solve samples must be >= 2".into());
        }
        Ok(())
    }

    /// Whether the 1D maps of iteration `t` (0-based) are smoothed.
    pub fn smooth_at(&self, t: usize) -> bool {
        self.nw_enabled && (!self.nw_final_only || t + 1 == self.iterations)
    }
}

//! Sequential one-sided recalibration of quantile forecasts.
//!
//! Signed forecast residuals are kept in an append-only store. At each
//! prediction date an additive buffer is the upper quantile of a
//! decay-weighted empirical distribution over a trailing window of
//! residuals. When the weighted computation is unavailable the store falls
//! back, in order, to equal weights, to the last valid buffer, and to zero;
//! every reported buffer is tagged with the regime that produced it.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::upper_quantile;

/// Fewest residuals in the active set before any buffer is estimated.
pub const MIN_RECENT: usize = 30;

/// Which computation produced a buffer value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BufferRegime {
    /// Decay-weighted quantile over the trailing window.
    Weighted,
    /// Equal-weight quantile (window too small for decay, or weights
    /// degenerate).
    Unweighted,
    /// Most recent successfully computed buffer, reused as-is.
    StaleReuse,
    /// No usable history; the buffer is zero.
    Zero,
}

impl BufferRegime {
    pub fn as_str(&self) -> &'static str {
        match self {
            BufferRegime::Weighted => "weighted",
            BufferRegime::Unweighted => "unweighted",
            BufferRegime::StaleReuse => "stale_reuse",
            BufferRegime::Zero => "zero",
        }
    }
}

/// A buffer value together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BufferDecision {
    pub regime: BufferRegime,
    pub value: f64,
    /// Residuals in the trailing window considered this date.
    pub n_recent: usize,
    /// Residuals accumulated since the start of the run.
    pub n_total: usize,
}

/// Smallest value `z` among `residuals` whose weighted empirical CDF
/// reaches `level`, with the CDF formed from `weights` normalized by their
/// sum.
///
/// Operation order is part of the contract: the weight total accumulates
/// over the window in storage order, each normalized weight is the
/// elementwise quotient by that total, candidates are the distinct residual
/// values in ascending order, and each candidate's mass re-accumulates over
/// the window in storage order. Any independent implementation following
/// the same order reproduces the result bit for bit.
fn buffer_from_weights(residuals: &[f64], weights: &[f64], level: f64) -> Option<f64> {
    debug_assert_eq!(residuals.len(), weights.len());
    if residuals.is_empty() {
        return None;
    }
    if residuals.iter().chain(weights.iter()).any(|v| !v.is_finite()) {
        return None;
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let normalized: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let mut candidates = residuals.to_vec();
    candidates.sort_by(|a, b| a.total_cmp(b));
    candidates.dedup();
    for z in candidates {
        let mut mass = 0.0;
        for (r, w) in residuals.iter().zip(&normalized) {
            if *r <= z {
                mass += *w;
            }
        }
        if mass >= level {
            return Some(z);
        }
    }
    // Total normalized mass can fall short of `level` only through rounding;
    // the largest residual is then the inf over the achievable set.
    residuals.iter().copied().max_by(f64::total_cmp)
}

/// Decay-weighted buffer over dated residuals: entry `(s, r)` gets weight
/// `lambda^(t - s)` with the exponent in calendar days, and the buffer is
/// the upper `1 - alpha` quantile of the weighted empirical distribution.
///
/// Returns `None` when the entries are empty, any residual is non-finite,
/// or the weights degenerate (all underflow to zero).
pub fn weighted_buffer(
    entries: &[(NaiveDate, f64)],
    t: NaiveDate,
    lambda: f64,
    alpha: f64,
) -> Option<f64> {
    if entries.is_empty() || !(lambda > 0.0) || !lambda.is_finite() {
        return None;
    }
    let weights: Vec<f64> = entries
        .iter()
        .map(|(s, _)| {
            let d = (t - *s).num_days();
            lambda.powi(d as i32)
        })
        .collect();
    let residuals: Vec<f64> = entries.iter().map(|(_, r)| *r).collect();
    buffer_from_weights(&residuals, &weights, 1.0 - alpha)
}

/// Equal-weight buffer: the empirical upper `1 - alpha` quantile, with the
/// boundary decided by exact rank arithmetic rather than summed weights.
pub fn unweighted_buffer(residuals: &[f64], alpha: f64) -> Option<f64> {
    if residuals.is_empty() || residuals.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(upper_quantile(residuals, 1.0 - alpha))
}

/// Recalibrated threshold: reference quantile plus buffer, clipped from
/// below by the floor when one is set.
pub fn reported_threshold(q_ref: f64, buffer: f64, floor: Option<f64>) -> f64 {
    let core = q_ref + buffer;
    match floor {
        Some(f) => core.max(f),
        None => core,
    }
}

/// Append-only dated residual store with a count-based trailing window.
#[derive(Debug, Clone)]
pub struct ResidualStore {
    entries: Vec<(NaiveDate, f64)>,
    window: usize,
    lambda: f64,
    alpha: f64,
    last_valid_buffer: Option<f64>,
}

impl ResidualStore {
    /// `window` is the maximum number of trailing residuals considered,
    /// `lambda` the per-day decay factor, `alpha` the target exceedance
    /// rate.
    pub fn new(window: usize, lambda: f64, alpha: f64) -> ResidualStore {
        debug_assert!(window > 0);
        debug_assert!(lambda > 0.0 && lambda <= 1.0);
        debug_assert!(alpha > 0.0 && alpha < 1.0);
        ResidualStore { entries: Vec::new(), window, lambda, alpha, last_valid_buffer: None }
    }

    /// Record the residual observed for `date`. Dates must strictly
    /// increase across calls.
    pub fn push(&mut self, date: NaiveDate, residual: f64) -> Result<()> {
        if let Some((last, _)) = self.entries.last() {
            if date <= *last {
                return Err(Error::OutOfOrderUpdate { date, last: *last });
            }
        }
        self.entries.push((date, residual));
        Ok(())
    }

    pub fn n_total(&self) -> usize {
        self.entries.len()
    }

    /// The trailing window: the last `min(window, n)` entries.
    pub fn recent(&self) -> &[(NaiveDate, f64)] {
        let n = self.entries.len();
        &self.entries[n.saturating_sub(self.window)..]
    }

    pub fn last_valid_buffer(&self) -> Option<f64> {
        self.last_valid_buffer
    }

    /// Resolve the buffer for prediction date `t`, walking the fallback
    /// ladder and remembering the result when a fresh computation succeeds.
    pub fn decide_buffer(&mut self, t: NaiveDate) -> BufferDecision {
        let n_total = self.entries.len();
        let recent = self.recent();
        let n_recent = recent.len();
        let decision = |regime, value| BufferDecision { regime, value, n_recent, n_total };

        if n_recent >= MIN_RECENT {
            if let Some(b) = weighted_buffer(recent, t, self.lambda, self.alpha) {
                self.last_valid_buffer = Some(b);
                return decision(BufferRegime::Weighted, b);
            }
            let values: Vec<f64> = recent.iter().map(|(_, r)| *r).collect();
            if let Some(b) = unweighted_buffer(&values, self.alpha) {
                self.last_valid_buffer = Some(b);
                return decision(BufferRegime::Unweighted, b);
            }
        } else if n_total >= MIN_RECENT {
            // The configured window is smaller than the activation count;
            // fall back to equal weights over the full history.
            let values: Vec<f64> = self.entries.iter().map(|(_, r)| *r).collect();
            if let Some(b) = unweighted_buffer(&values, self.alpha) {
                self.last_valid_buffer = Some(b);
                return decision(BufferRegime::Unweighted, b);
            }
        } else {
            return decision(BufferRegime::Zero, 0.0);
        }

        match self.last_valid_buffer {
            Some(b) => decision(BufferRegime::StaleReuse, b),
            None => decision(BufferRegime::Zero, 0.0),
        }
    }
}

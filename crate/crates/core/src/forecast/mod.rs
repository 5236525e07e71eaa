//! Rolling-window upper-quantile forecasting of normalized losses.
//!
//! The base learner minimizes pinball loss at the upper quantile level
//! `1 - alpha`; a historical empirical quantile serves as benchmark, and an
//! optional floor clips reference thresholds from below.

mod gbt;
mod linear;
mod tree;

pub use gbt::{GbtModel, GbtParams};
pub use linear::{LinearModel, LinearParams};

use serde::{Deserialize, Serialize};

use crate::stats::{mean, median, upper_quantile};

/// Pinball (quantile) loss at level `tau` for residual `u = y - pred`.
pub fn pinball_loss(u: f64, tau: f64) -> f64 {
    u * (tau - if u < 0.0 { 1.0 } else { 0.0 })
}

/// Negative gradient of the pinball loss with respect to the prediction,
/// i.e. `tau` above the prediction and `tau - 1` below it. At the kink the
/// zero subgradient is chosen so point masses are fixed points.
pub fn pinball_negative_gradient(u: f64, tau: f64) -> f64 {
    if u > 0.0 {
        tau
    } else if u < 0.0 {
        tau - 1.0
    } else {
        0.0
    }
}

/// Rolling training-window schedule shared by all learners.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Maximum trailing rows used per fit.
    pub window: usize,
    /// Refit every this many prediction dates; the model is reused between.
    pub retrain_every: usize,
    /// Target exceedance rate; quantile level is `1 - alpha`.
    pub alpha: f64,
    /// Lower clip for reference thresholds; `None` disables the floor.
    pub floor: Option<f64>,
    /// Minimum rows before a first forecast is attempted.
    pub min_train_rows: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            window: 252,
            retrain_every: 5,
            alpha: 0.10,
            floor: Some(0.0),
            min_train_rows: 60,
        }
    }
}

/// Why a fit attempt produced no model. The run driver keeps the previous
/// model in that case.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("too few training rows: {got} < {need}")]
    TooFewRows { got: usize, need: usize },
    #[error("degenerate training data: {0}")]
    Degenerate(String),
}

/// Which base learner a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    Gbt,
    Linear,
}

impl LearnerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LearnerKind::Gbt => "gbt",
            LearnerKind::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<LearnerKind> {
        match s {
            "gbt" => Some(LearnerKind::Gbt),
            "linear" => Some(LearnerKind::Linear),
            _ => None,
        }
    }
}

/// Hyperparameters for both learners; `kind` picks which one runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerParams {
    pub kind: LearnerKind,
    pub gbt: GbtParams,
    pub linear: LinearParams,
}

impl Default for LearnerParams {
    fn default() -> Self {
        LearnerParams {
            kind: LearnerKind::Gbt,
            gbt: GbtParams::default(),
            linear: LinearParams::default(),
        }
    }
}

/// A fitted model of either kind.
#[derive(Debug, Clone)]
pub enum QuantileModel {
    Gbt(GbtModel),
    Linear(LinearModel),
}

impl QuantileModel {
    pub fn predict(&self, x: &[Option<f64>]) -> f64 {
        match self {
            QuantileModel::Gbt(m) => m.predict(x),
            QuantileModel::Linear(m) => m.predict(x),
        }
    }

    pub fn train_losses(&self) -> &[f64] {
        match self {
            QuantileModel::Gbt(m) => m.train_losses(),
            QuantileModel::Linear(m) => m.train_losses(),
        }
    }
}

/// Fit the configured learner at quantile level `1 - alpha`.
pub fn fit_model(
    x: &[Vec<Option<f64>>],
    y: &[f64],
    alpha: f64,
    params: &LearnerParams,
) -> Result<QuantileModel, FitError> {
    let level = 1.0 - alpha;
    match params.kind {
        LearnerKind::Gbt => GbtModel::fit(x, y, level, &params.gbt).map(QuantileModel::Gbt),
        LearnerKind::Linear => {
            LinearModel::fit(x, y, level, &params.linear).map(QuantileModel::Linear)
        }
    }
}

/// Benchmark threshold: the empirical upper `1 - alpha` quantile of the
/// trailing losses (smallest order statistic whose ECDF reaches the level).
pub fn historical_benchmark(y: &[f64], alpha: f64) -> f64 {
    upper_quantile(y, 1.0 - alpha)
}

/// Clip a threshold from below; `None` disables the floor.
pub fn apply_floor(q: f64, floor: Option<f64>) -> f64 {
    match floor {
        Some(f) => q.max(f),
        None => q,
    }
}

/// Median-impute then standardize with training-window statistics only.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    medians: Vec<f64>,
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl Preprocessor {
    pub fn fit(x: &[Vec<Option<f64>>]) -> Result<Preprocessor, FitError> {
        let p = x.first().map(|r| r.len()).unwrap_or(0);
        if p == 0 {
            return Err(FitError::Degenerate("no predictor columns".into()));
        }
        if x.iter().any(|r| r.len() != p) {
            return Err(FitError::Degenerate("ragged predictor rows".into()));
        }
        let mut medians = Vec::with_capacity(p);
        for j in 0..p {
            let observed: Vec<f64> = x.iter().filter_map(|r| r[j]).filter(|v| v.is_finite()).collect();
            medians.push(median(&observed).unwrap_or(0.0));
        }
        let mut means = Vec::with_capacity(p);
        let mut stds = Vec::with_capacity(p);
        for j in 0..p {
            let col: Vec<f64> = x
                .iter()
                .map(|r| r[j].filter(|v| v.is_finite()).unwrap_or(medians[j]))
                .collect();
            let m = mean(&col).unwrap_or(0.0);
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / col.len() as f64;
            let sd = var.sqrt();
            means.push(m);
            stds.push(if sd > 1e-12 { sd } else { 1.0 });
        }
        Ok(Preprocessor { medians, means, stds })
    }

    pub fn n_features(&self) -> usize {
        self.medians.len()
    }

    /// Impute and standardize one raw row with the stored statistics.
    pub fn transform(&self, x: &[Option<f64>]) -> Vec<f64> {
        (0..self.medians.len())
            .map(|j| {
                let v = x
                    .get(j)
                    .copied()
                    .flatten()
                    .filter(|v| v.is_finite())
                    .unwrap_or(self.medians[j]);
                (v - self.means[j]) / self.stds[j]
            })
            .collect()
    }
}

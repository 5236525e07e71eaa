//! Linear quantile regression by deterministic full-batch subgradient
//! descent. Kept as an alternative base learner for robustness comparisons;
//! same preprocessing and interface as the boosted model.

use serde::{Deserialize, Serialize};

use super::{pinball_loss, pinball_negative_gradient, FitError, Preprocessor};
use crate::stats::upper_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearParams {
    /// Full-batch subgradient epochs.
    pub epochs: usize,
    /// Base step size, scaled by the target spread and decayed as 1/sqrt(t).
    pub step_scale: f64,
}

impl Default for LinearParams {
    fn default() -> Self {
        LinearParams { epochs: 200, step_scale: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub struct LinearModel {
    pre: Preprocessor,
    level: f64,
    weights: Vec<f64>,
    intercept: f64,
    train_losses: Vec<f64>,
}

impl LinearModel {
    pub fn fit(
        x: &[Vec<Option<f64>>],
        y: &[f64],
        level: f64,
        params: &LinearParams,
    ) -> Result<LinearModel, FitError> {
        let n = y.len();
        if n == 0 || x.len() != n {
            return Err(FitError::Degenerate("empty or misaligned training data".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(FitError::Degenerate("non-finite training target".into()));
        }
        let pre = Preprocessor::fit(x)?;
        let rows: Vec<Vec<f64>> = x.iter().map(|r| pre.transform(r)).collect();
        let p = pre.n_features();

        let mut weights = vec![0.0; p];
        let mut intercept = upper_quantile(y, level);
        // Scale steps by the spread of y around the starting intercept so
        // the optimizer behaves the same across loss magnitudes.
        let spread = y.iter().map(|v| (v - intercept).abs()).sum::<f64>() / n as f64;
        let step0 = params.step_scale * spread.max(1e-9);

        let mean_loss = |w: &[f64], b: f64| {
            rows.iter()
                .zip(y)
                .map(|(r, yi)| {
                    let pred = b + r.iter().zip(w).map(|(xi, wi)| xi * wi).sum::<f64>();
                    pinball_loss(yi - pred, level)
                })
                .sum::<f64>()
                / n as f64
        };

        let mut train_losses = vec![mean_loss(&weights, intercept)];
        let mut best = (train_losses[0], weights.clone(), intercept);
        for epoch in 0..params.epochs {
            let mut gw = vec![0.0; p];
            let mut gb = 0.0;
            for (r, yi) in rows.iter().zip(y) {
                let pred = intercept + r.iter().zip(&weights).map(|(xi, wi)| xi * wi).sum::<f64>();
                let g = pinball_negative_gradient(yi - pred, level);
                for (j, xi) in r.iter().enumerate() {
                    gw[j] += g * xi;
                }
                gb += g;
            }
            let step = step0 / ((epoch + 1) as f64).sqrt();
            for (wj, gj) in weights.iter_mut().zip(&gw) {
                *wj += step * gj / n as f64;
            }
            intercept += step * gb / n as f64;
            let loss = mean_loss(&weights, intercept);
            train_losses.push(loss);
            if loss < best.0 {
                best = (loss, weights.clone(), intercept);
            }
        }
        // Keep the best iterate: subgradient descent is not monotone.
        let (_, weights, intercept) = best;

        Ok(LinearModel { pre, level, weights, intercept, train_losses })
    }

    pub fn predict(&self, x: &[Option<f64>]) -> f64 {
        let row = self.pre.transform(x);
        self.intercept + row.iter().zip(&self.weights).map(|(xi, wi)| xi * wi).sum::<f64>()
    }

    pub fn train_losses(&self) -> &[f64] {
        &self.train_losses
    }

    pub fn level(&self) -> f64 {
        self.level
    }
}

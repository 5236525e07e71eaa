//! Gradient-boosted trees for upper-quantile regression under pinball loss.
//!
//! Split structure is grown on the pinball subgradients; leaf values are the
//! in-leaf empirical quantile of the current residuals, which is the exact
//! per-leaf minimizer. Because moving part way toward a convex minimizer
//! never increases a convex loss, the training pinball loss is non-increasing
//! stage by stage for any learn rate in (0, 1].

use serde::{Deserialize, Serialize};

use super::tree::{self, Tree};
use super::{pinball_loss, pinball_negative_gradient, FitError, Preprocessor};
use crate::stats::upper_quantile;

/// Boosting hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learn_rate: f64,
    pub min_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams { n_trees: 200, max_depth: 3, learn_rate: 0.05, min_leaf: 10 }
    }
}

/// A fitted boosted quantile model.
#[derive(Debug, Clone)]
pub struct GbtModel {
    pre: Preprocessor,
    level: f64,
    base_score: f64,
    learn_rate: f64,
    trees: Vec<Tree>,
    /// Mean training pinball loss at stage 0 (base score only) and after
    /// each boosting stage.
    train_losses: Vec<f64>,
}

impl GbtModel {
    pub fn fit(
        x: &[Vec<Option<f64>>],
        y: &[f64],
        level: f64,
        params: &GbtParams,
    ) -> Result<GbtModel, FitError> {
        let n = y.len();
        if n == 0 || x.len() != n {
            return Err(FitError::Degenerate("empty or misaligned training data".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(FitError::Degenerate("non-finite training target".into()));
        }
        let pre = Preprocessor::fit(x)?;
        let rows: Vec<Vec<f64>> = x.iter().map(|r| pre.transform(r)).collect();
        let sorted = tree::sort_columns(&rows, pre.n_features());

        let base_score = upper_quantile(y, level);
        let mut preds = vec![base_score; n];
        let mut train_losses = Vec::with_capacity(params.n_trees + 1);
        let mean_loss = |preds: &[f64]| {
            preds
                .iter()
                .zip(y)
                .map(|(p, yi)| pinball_loss(yi - p, level))
                .sum::<f64>()
                / n as f64
        };
        train_losses.push(mean_loss(&preds));

        let mut trees = Vec::with_capacity(params.n_trees);
        for _ in 0..params.n_trees {
            let grads: Vec<f64> = preds
                .iter()
                .zip(y)
                .map(|(p, yi)| pinball_negative_gradient(yi - p, level))
                .collect();
            let (mut t, leaf_of) = tree::fit(&rows, &sorted, &grads, params.max_depth, params.min_leaf);
            // Replace leaf values with the in-leaf residual quantile.
            let mut leaf_rows: std::collections::BTreeMap<usize, Vec<f64>> =
                std::collections::BTreeMap::new();
            for (r, leaf) in leaf_of.iter().enumerate() {
                leaf_rows.entry(*leaf).or_default().push(y[r] - preds[r]);
            }
            let mut leaf_values: std::collections::BTreeMap<usize, f64> =
                std::collections::BTreeMap::new();
            for (leaf, residuals) in &leaf_rows {
                leaf_values.insert(*leaf, upper_quantile(residuals, level));
            }
            for (leaf, value) in &leaf_values {
                t.set_leaf_value(*leaf, *value);
            }
            for (r, leaf) in leaf_of.iter().enumerate() {
                preds[r] += params.learn_rate * leaf_values[leaf];
            }
            train_losses.push(mean_loss(&preds));
            trees.push(t);
        }

        Ok(GbtModel {
            pre,
            level,
            base_score,
            learn_rate: params.learn_rate,
            trees,
            train_losses,
        })
    }

    /// Predict the conditional upper quantile for one raw predictor vector.
    pub fn predict(&self, x: &[Option<f64>]) -> f64 {
        let row = self.pre.transform(x);
        let mut out = self.base_score;
        for t in &self.trees {
            out += self.learn_rate * t.apply(&row);
        }
        out
    }

    pub fn train_losses(&self) -> &[f64] {
        &self.train_losses
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn level(&self) -> f64 {
        self.level
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn dense(rows: Vec<Vec<f64>>) -> Vec<Vec<Option<f64>>> {
        rows.into_iter()
            .map(|r| r.into_iter().map(Some).collect())
            .collect()
    }

    #[test]
    fn zero_trees_predicts_training_quantile() {
        let x = dense((0..40).map(|i| vec![i as f64]).collect());
        let y: Vec<f64> = (1..=40).map(f64::from).collect();
        let params = GbtParams { n_trees: 0, ..GbtParams::default() };
        let model = GbtModel::fit(&x, &y, 0.9, &params).unwrap();
        // k = 36 of 40: 36/40 = 0.9.
        assert_eq!(model.base_score(), 36.0);
        assert_eq!(model.predict(&[Some(3.0)]), 36.0);
    }

    #[test]
    fn constant_target_is_a_fixed_point() {
        let x = dense((0..60).map(|i| vec![(i % 7) as f64, (i % 3) as f64]).collect());
        let y = vec![1.5; 60];
        let model = GbtModel::fit(&x, &y, 0.9, &GbtParams::default()).unwrap();
        assert_eq!(model.predict(&[Some(2.0), Some(1.0)]), 1.5);
        for w in model.train_losses().windows(2) {
            assert_eq!(w[0], w[1]);
        }
    }

    #[test]
    fn training_loss_is_monotone_non_increasing() {
        let mut rng = StdRng::seed_from_u64(5);
        let x = dense(
            (0..150)
                .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
                .collect(),
        );
        let y: Vec<f64> = x
            .iter()
            .map(|r| r[0].unwrap() * 0.5 + rng.gen_range(-0.3..0.3))
            .collect();
        let params = GbtParams { n_trees: 60, ..GbtParams::default() };
        let model = GbtModel::fit(&x, &y, 0.9, &params).unwrap();
        assert_eq!(model.train_losses().len(), 61);
        for w in model.train_losses().windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn uninformative_features_stay_near_marginal_quantile() {
        let mut rng = StdRng::seed_from_u64(17);
        let x = dense((0..252).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect());
        let y: Vec<f64> = (0..252).map(|_| rng.gen_range(0.0..1.0)).collect();
        let model = GbtModel::fit(&x, &y, 0.9, &GbtParams::default()).unwrap();
        let marginal = upper_quantile(&y, 0.9);
        let pred = model.predict(&[Some(0.0)]);
        assert!(
            (pred - marginal).abs() <= 0.10 * marginal.abs(),
            "pred {pred} vs marginal {marginal}"
        );
    }

    #[test]
    fn informative_feature_beats_constant_benchmark_out_of_sample() {
        let mut rng = StdRng::seed_from_u64(23);
        let gen_row = |rng: &mut StdRng| {
            let regime = if rng.gen_bool(0.5) { 0.0 } else { 1.0 };
            let y = 0.2 + regime * 1.0 + rng.gen_range(-0.1..0.1);
            (vec![Some(regime), Some(rng.gen_range(-1.0..1.0))], y)
        };
        let train: Vec<_> = (0..252).map(|_| gen_row(&mut rng)).collect();
        let test: Vec<_> = (0..150).map(|_| gen_row(&mut rng)).collect();
        let x: Vec<Vec<Option<f64>>> = train.iter().map(|(x, _)| x.clone()).collect();
        let y: Vec<f64> = train.iter().map(|(_, y)| *y).collect();
        let model = GbtModel::fit(&x, &y, 0.9, &GbtParams::default()).unwrap();
        let constant = upper_quantile(&y, 0.9);
        let (mut model_loss, mut const_loss) = (0.0, 0.0);
        for (xt, yt) in &test {
            model_loss += pinball_loss(yt - model.predict(xt), 0.9);
            const_loss += pinball_loss(yt - constant, 0.9);
        }
        assert!(
            model_loss < const_loss,
            "model {model_loss} not better than constant {const_loss}"
        );
    }

    #[test]
    fn duplicated_identical_columns_leave_predictions_unchanged() {
        let mut rng = StdRng::seed_from_u64(31);
        let base: Vec<Vec<f64>> = (0..120)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let y: Vec<f64> = base.iter().map(|r| r[0] + 0.3 * r[1]).collect();
        let x1 = dense(base.clone());
        let x2 = dense(base.iter().map(|r| vec![r[0], r[1], r[0], r[1]]).collect());
        let params = GbtParams { n_trees: 40, ..GbtParams::default() };
        let m1 = GbtModel::fit(&x1, &y, 0.9, &params).unwrap();
        let m2 = GbtModel::fit(&x2, &y, 0.9, &params).unwrap();
        for i in 0..10 {
            let a = vec![Some(0.1 * i as f64), Some(-0.05 * i as f64)];
            let b = vec![a[0], a[1], a[0], a[1]];
            assert_eq!(m1.predict(&a), m2.predict(&b));
        }
    }

    #[test]
    fn refit_on_identical_data_is_identical() {
        let mut rng = StdRng::seed_from_u64(41);
        let x = dense(
            (0..100)
                .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
                .collect(),
        );
        let y: Vec<f64> = (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let params = GbtParams { n_trees: 30, ..GbtParams::default() };
        let a = GbtModel::fit(&x, &y, 0.9, &params).unwrap();
        let b = GbtModel::fit(&x, &y, 0.9, &params).unwrap();
        assert_eq!(a.train_losses(), b.train_losses());
        let probe = vec![Some(0.2), Some(-0.4)];
        assert_eq!(a.predict(&probe), b.predict(&probe));
    }

    #[test]
    fn missing_values_impute_to_training_medians() {
        // Feature 0 informative, missing at predict time: the model should
        // fall back to the median-imputed path deterministically.
        let x = dense((0..100).map(|i| vec![(i % 10) as f64]).collect());
        let y: Vec<f64> = (0..100).map(|i| (i % 10) as f64).collect();
        let model = GbtModel::fit(&x, &y, 0.9, &GbtParams::default()).unwrap();
        let imputed = model.predict(&[None]);
        let at_median = model.predict(&[Some(4.5)]);
        assert_relative_eq!(imputed, at_median, epsilon = 1e-12);
    }
}

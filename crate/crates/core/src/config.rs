//! Versioned run configuration.
//!
//! One JSON document drives every command; unknown keys and out-of-range
//! values are rejected up front so a run never silently falls back to a
//! default the user did not choose.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::backtest::RunSettings;
use crate::book::BookType;
use crate::error::{Error, Result};
use crate::forecast::{GbtParams, LearnerKind, LearnerParams, LinearParams, TrainConfig};
use crate::marking::MarkPolicy;
use crate::synth::SynthConfig;

/// Schema version this build reads and writes.
pub const CONFIG_VERSION: u32 = 1;

/// Where the quote history comes from.
///
/// JSON shape: `"data": "synth"` or
/// `"data": {"csv": {"chain": "...", "market": "...", "rates": "..."}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Generate the seeded synthetic market described by the `synth` block.
    #[default]
    Synth,
    /// Read the three input CSVs from disk.
    Csv {
        chain: PathBuf,
        market: PathBuf,
        rates: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub version: u32,
    /// Quote history: in-process synthetic market or CSV paths.
    pub data: DataSource,
    /// Target exceedance rate.
    pub alpha: f64,
    /// Lower clip for thresholds; `null` disables it.
    pub floor: Option<f64>,
    /// Book codes to run; empty means all of them.
    pub books: Vec<String>,
    /// `gbt` or `linear`.
    pub learner: String,
    pub gbt: GbtParams,
    pub linear: LinearParams,
    pub train_window: usize,
    pub retrain_every: usize,
    pub min_train_rows: usize,
    pub buffer_window: usize,
    pub lambda: f64,
    pub rolling_window: usize,
    pub delta_tolerance: f64,
    /// Optional stress window, both bounds inclusive and both required.
    pub crisis_start: Option<NaiveDate>,
    pub crisis_end: Option<NaiveDate>,
    pub synth: SynthConfig,
    /// Sweep axes for the grid command.
    pub grid_lambdas: Vec<f64>,
    pub grid_windows: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        RunConfig {
            version: CONFIG_VERSION,
            data: DataSource::Synth,
            alpha: train.alpha,
            floor: train.floor,
            books: Vec::new(),
            learner: LearnerKind::Gbt.as_str().to_string(),
            gbt: GbtParams::default(),
            linear: LinearParams::default(),
            train_window: train.window,
            retrain_every: train.retrain_every,
            min_train_rows: train.min_train_rows,
            buffer_window: 250,
            lambda: 0.99,
            rolling_window: 50,
            delta_tolerance: 0.05,
            crisis_start: None,
            crisis_end: None,
            synth: SynthConfig::default(),
            grid_lambdas: vec![0.95, 0.97, 0.99],
            grid_windows: vec![125, 250],
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    /// Parse and validate a JSON config file.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| config_err(format!("invalid config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(config_err(format!(
                "config version {} is not supported; this build reads version {CONFIG_VERSION}",
                self.version
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(config_err(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if let Some(f) = self.floor {
            if !f.is_finite() {
                return Err(config_err("floor must be finite when set"));
            }
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(config_err(format!("lambda must lie in (0, 1], got {}", self.lambda)));
        }
        for (name, v) in [
            ("train_window", self.train_window),
            ("retrain_every", self.retrain_every),
            ("min_train_rows", self.min_train_rows),
            ("buffer_window", self.buffer_window),
            ("rolling_window", self.rolling_window),
        ] {
            if v == 0 {
                return Err(config_err(format!("{name} must be positive")));
            }
        }
        if self.train_window < self.min_train_rows {
            return Err(config_err(format!(
                "train_window {} is smaller than min_train_rows {}",
                self.train_window, self.min_train_rows
            )));
        }
        if !(self.delta_tolerance >= 0.0) {
            return Err(config_err("delta_tolerance must be non-negative"));
        }
        if LearnerKind::parse(&self.learner).is_none() {
            return Err(config_err(format!(
                "unknown learner '{}'; expected gbt or linear",
                self.learner
            )));
        }
        for code in &self.books {
            if BookType::parse(code).is_none() {
                return Err(config_err(format!("unknown book '{code}'")));
            }
        }
        if !(self.gbt.learn_rate > 0.0 && self.gbt.learn_rate <= 1.0) {
            return Err(config_err("gbt.learn_rate must lie in (0, 1]"));
        }
        if self.gbt.n_trees == 0 || self.gbt.max_depth == 0 || self.gbt.min_leaf == 0 {
            return Err(config_err("gbt.n_trees, gbt.max_depth, gbt.min_leaf must be positive"));
        }
        if self.linear.epochs == 0 || !(self.linear.step_scale > 0.0) {
            return Err(config_err("linear.epochs and linear.step_scale must be positive"));
        }
        match (self.crisis_start, self.crisis_end) {
            (Some(a), Some(b)) if a > b => {
                return Err(config_err(format!("crisis_start {a} is after crisis_end {b}")));
            }
            (Some(_), None) | (None, Some(_)) => {
                return Err(config_err("crisis_start and crisis_end must be set together"));
            }
            _ => {}
        }
        self.validate_synth()?;
        for l in &self.grid_lambdas {
            if !(*l > 0.0 && *l <= 1.0) {
                return Err(config_err(format!("grid lambda {l} must lie in (0, 1]")));
            }
        }
        if self.grid_windows.iter().any(|w| *w == 0) {
            return Err(config_err("grid windows must be positive"));
        }
        Ok(())
    }

    fn validate_synth(&self) -> Result<()> {
        let s = &self.synth;
        if s.n_days < 2 {
            return Err(config_err("synth.n_days must be at least 2"));
        }
        if !(s.spot0 > 0.0 && s.strike_spacing > 0.0) {
            return Err(config_err("synth.spot0 and synth.strike_spacing must be positive"));
        }
        if !(s.sigma_calm > 0.0 && s.sigma_stressed > 0.0) {
            return Err(config_err("synth sigmas must be positive"));
        }
        for (name, p) in [
            ("synth.p_calm_to_stress", s.p_calm_to_stress),
            ("synth.p_stress_to_calm", s.p_stress_to_calm),
            ("synth.missing_prob", s.missing_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(config_err(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !(s.spread_frac >= 0.0) || !(s.vol_jitter >= 0.0) || !(s.spot_vol_scale >= 0.0) {
            return Err(config_err(
                "synth.spread_frac, synth.vol_jitter, synth.spot_vol_scale must be non-negative",
            ));
        }
        if s.max_expiry_weeks * 7 < 125 {
            return Err(config_err(
                "synth.max_expiry_weeks must reach past the maturity filter (at least 18 weeks)",
            ));
        }
        if let Some((a, b)) = s.crisis {
            if a > b {
                return Err(config_err(format!("synth crisis start {a} is after its end {b}")));
            }
        }
        Ok(())
    }

    /// Books to run, expanding the empty list to all of them.
    pub fn book_types(&self) -> Vec<BookType> {
        if self.books.is_empty() {
            BookType::all().to_vec()
        } else {
            self.books.iter().filter_map(|c| BookType::parse(c)).collect()
        }
    }

    pub fn learner_params(&self) -> LearnerParams {
        LearnerParams {
            kind: LearnerKind::parse(&self.learner).unwrap_or(LearnerKind::Gbt),
            gbt: self.gbt,
            linear: self.linear,
        }
    }

    pub fn crisis(&self) -> Option<(NaiveDate, NaiveDate)> {
        match (self.crisis_start, self.crisis_end) {
            (Some(a), Some(b)) => Some((a, b)),
            _ => None,
        }
    }

    /// Assemble run settings for one marking policy.
    pub fn settings(&self, policy: MarkPolicy) -> RunSettings {
        RunSettings {
            policy,
            delta_tolerance: self.delta_tolerance,
            train: TrainConfig {
                window: self.train_window,
                retrain_every: self.retrain_every,
                alpha: self.alpha,
                floor: self.floor,
                min_train_rows: self.min_train_rows,
            },
            learner: self.learner_params(),
            buffer_window: self.buffer_window,
            lambda: self.lambda,
            rolling_window: self.rolling_window,
            crisis: self.crisis(),
        }
    }
}

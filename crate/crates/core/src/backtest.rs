//! Rolling forecast, recalibration, and evaluation over a chain history.
//!
//! The driver walks formation dates in order: form the configured book on
//! each day's cleaned chain, mark it the following day, assemble the panel,
//! then produce one-day-ahead thresholds from a learner refit on a trailing
//! window every few prediction dates plus an additive buffer estimated from
//! past forecast residuals. Each prediction record carries its realized
//! outcome, so exceedance rates, rolling windows, crisis slices, and
//! marking-policy ablations all derive from one record stream.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::book::{form_book, BookType, DEFAULT_DELTA_TOLERANCE};
use crate::chain::ChainStore;
use crate::conformal::{reported_threshold, BufferRegime, ResidualStore};
use crate::error::{Error, Result};
use crate::forecast::{
    apply_floor, fit_model, historical_benchmark, pinball_loss, LearnerParams, QuantileModel,
    TrainConfig,
};
use crate::marking::{mark_book, MarkPolicy, ModeCounts};
use crate::panel::{build_panel, PanelEntry, PanelRow};
use crate::state::build_states;
use crate::stats::mean;

/// Everything a run needs besides the data and the book choice.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub policy: MarkPolicy,
    /// Net-delta magnitude above which a spot hedge leg is added.
    pub delta_tolerance: f64,
    pub train: TrainConfig,
    pub learner: LearnerParams,
    /// Trailing residual count feeding the buffer.
    pub buffer_window: usize,
    /// Per-day decay of residual weights.
    pub lambda: f64,
    /// Window length for rolling exceedance rates.
    pub rolling_window: usize,
    /// Optional stress window reported separately (inclusive bounds).
    pub crisis: Option<(NaiveDate, NaiveDate)>,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            policy: MarkPolicy::Robust,
            delta_tolerance: DEFAULT_DELTA_TOLERANCE,
            train: TrainConfig::default(),
            learner: LearnerParams::default(),
            buffer_window: 250,
            lambda: 0.99,
            rolling_window: 50,
            crisis: None,
        }
    }
}

/// One prediction date: thresholds, buffer provenance, and the realized
/// outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    pub date: NaiveDate,
    /// Normalized loss realized the following day.
    pub y_next: f64,
    /// Raw learner output.
    pub q_base: f64,
    /// Trailing empirical quantile benchmark.
    pub q_hist: f64,
    /// Floored learner output; the buffer's reference point.
    pub q_ref: f64,
    pub buffer: f64,
    pub regime: BufferRegime,
    pub n_recent: usize,
    pub n_total: usize,
    /// `q_ref + buffer`, before the floor.
    pub q_core: f64,
    /// Final recalibrated threshold.
    pub q_rep: f64,
    pub mode_counts: ModeCounts,
    pub strict_ok: bool,
    pub distortion_bound: Option<f64>,
}

/// Threshold families evaluated side by side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Historical,
    BaseRaw,
    BaseFloored,
    Conformal,
}

impl Method {
    pub fn all() -> [Method; 4] {
        [Method::Historical, Method::BaseRaw, Method::BaseFloored, Method::Conformal]
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Historical => "historical",
            Method::BaseRaw => "base_raw",
            Method::BaseFloored => "base_floored",
            Method::Conformal => "conformal",
        }
    }

    pub fn threshold(&self, r: &ForecastRecord) -> f64 {
        match self {
            Method::Historical => r.q_hist,
            Method::BaseRaw => r.q_base,
            Method::BaseFloored => r.q_ref,
            Method::Conformal => r.q_rep,
        }
    }
}

/// An exceedance is a realized loss strictly above the threshold.
pub fn exceeds(record: &ForecastRecord, method: Method) -> bool {
    record.y_next > method.threshold(record)
}

/// Forecast-loop output before evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopOutput {
    pub records: Vec<ForecastRecord>,
    /// Rows passed over while the training window was still too short.
    pub warmup_rows: usize,
    /// Rows passed over because no model had been fit successfully yet.
    pub no_model_rows: usize,
    /// Fit attempts that failed (the previous model is retained).
    pub fit_failures: usize,
    /// Fit attempts that succeeded.
    pub fits: usize,
}

/// Walk the panel in order, producing one record per forecastable row.
///
/// The learner refits on the trailing `train.window` rows every
/// `train.retrain_every` prediction dates (and keeps trying each date after
/// a failed fit); the residual buffer uses only residuals realized before
/// the row being predicted.
pub fn run_forecast_loop(panel: &[PanelRow], settings: &RunSettings) -> Result<LoopOutput> {
    let cfg = &settings.train;
    let mut out = LoopOutput {
        records: Vec::new(),
        warmup_rows: 0,
        no_model_rows: 0,
        fit_failures: 0,
        fits: 0,
    };
    let mut residuals = ResidualStore::new(settings.buffer_window, settings.lambda, cfg.alpha);
    let mut model: Option<QuantileModel> = None;
    let mut preds_since_fit = 0usize;

    for i in 0..panel.len() {
        if i < cfg.min_train_rows {
            out.warmup_rows += 1;
            continue;
        }
        let lo = i - cfg.window.min(i);
        let train = &panel[lo..i];
        if model.is_none() || preds_since_fit >= cfg.retrain_every {
            let x: Vec<Vec<Option<f64>>> = train.iter().map(|r| r.x.clone()).collect();
            let y: Vec<f64> = train.iter().map(|r| r.y_next).collect();
            match fit_model(&x, &y, cfg.alpha, &settings.learner) {
                Ok(m) => {
                    model = Some(m);
                    out.fits += 1;
                    preds_since_fit = 0;
                }
                Err(_) => out.fit_failures += 1,
            }
        }
        let Some(m) = model.as_ref() else {
            out.no_model_rows += 1;
            continue;
        };

        let row = &panel[i];
        let q_base = m.predict(&row.x);
        let y_window: Vec<f64> = train.iter().map(|r| r.y_next).collect();
        let q_hist = historical_benchmark(&y_window, cfg.alpha);
        let q_ref = apply_floor(q_base, cfg.floor);
        let decision = residuals.decide_buffer(row.date);
        let q_core = q_ref + decision.value;
        let q_rep = reported_threshold(q_ref, decision.value, cfg.floor);

        out.records.push(ForecastRecord {
            date: row.date,
            y_next: row.y_next,
            q_base,
            q_hist,
            q_ref,
            buffer: decision.value,
            regime: decision.regime,
            n_recent: decision.n_recent,
            n_total: decision.n_total,
            q_core,
            q_rep,
            mode_counts: row.mode_counts,
            strict_ok: row.strict_ok,
            distortion_bound: row.distortion_bound,
        });
        residuals.push(row.date, row.y_next - q_ref)?;
        preds_since_fit += 1;
    }
    Ok(out)
}

/// A complete single-policy run: panel, records, and bookkeeping.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub book_type: BookType,
    pub policy: MarkPolicy,
    pub panel: Vec<PanelRow>,
    pub records: Vec<ForecastRecord>,
    /// Formation dates skipped before the panel stage, keyed by reason.
    pub skips: BTreeMap<String, usize>,
    pub warmup_rows: usize,
    pub no_model_rows: usize,
    pub fit_failures: usize,
    pub fits: usize,
}

/// Form, mark, and forecast `book_type` across the whole store under one
/// marking policy.
pub fn run_backtest(
    store: &ChainStore,
    book_type: BookType,
    settings: &RunSettings,
) -> Result<RunOutput> {
    let states = build_states(store);
    let mut entries: Vec<PanelEntry> = Vec::new();
    let mut skips: BTreeMap<String, usize> = BTreeMap::new();
    let n_days = store.len();
    for idx in 0..n_days.saturating_sub(1) {
        let day = store.day(idx);
        let next = store.day(idx + 1);
        let book = match form_book(&day.clean, &day.market, book_type, settings.delta_tolerance) {
            Ok(b) => b,
            Err(f) => {
                *skips.entry(format!("form_{}", f.code())).or_insert(0) += 1;
                continue;
            }
        };
        let marking = match mark_book(&book, next, settings.policy) {
            Ok(m) => m,
            Err(_) => {
                *skips.entry("mark_failed".into()).or_insert(0) += 1;
                continue;
            }
        };
        entries.push(PanelEntry { state: states[idx].clone(), book, marking });
    }
    let panel = build_panel(entries);
    let looped = run_forecast_loop(&panel, settings)?;
    Ok(RunOutput {
        book_type,
        policy: settings.policy,
        panel,
        records: looped.records,
        skips,
        warmup_rows: looped.warmup_rows,
        no_model_rows: looped.no_model_rows,
        fit_failures: looped.fit_failures,
        fits: looped.fits,
    })
}

/// Rolling means over every full window of exceedance indicators; empty
/// when fewer than `window` observations exist.
pub fn rolling_exceedance(hits: &[bool], window: usize) -> Vec<f64> {
    if window == 0 || hits.len() < window {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(hits.len() - window + 1);
    let mut sum = hits[..window].iter().filter(|h| **h).count();
    out.push(sum as f64 / window as f64);
    for i in window..hits.len() {
        sum += hits[i] as usize;
        sum -= hits[i - window] as usize;
        out.push(sum as f64 / window as f64);
    }
    out
}

/// Indices of records whose date falls inside the inclusive window.
pub fn crisis_indices(records: &[ForecastRecord], window: (NaiveDate, NaiveDate)) -> Vec<usize> {
    records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.date >= window.0 && r.date <= window.1)
        .map(|(i, _)| i)
        .collect()
}

/// Below this many in-window records, a crisis rate is flagged descriptive.
pub const CRISIS_MIN_N: usize = 50;

/// Evaluation of one threshold family over one record stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: String,
    pub n: usize,
    pub exceedance_rate: Option<f64>,
    pub mean_threshold: Option<f64>,
    pub mean_pinball: Option<f64>,
    /// Largest rolling exceedance rate over full windows; `None` when the
    /// stream is shorter than the window.
    pub max_rolling_exceedance: Option<f64>,
    pub crisis_n: usize,
    pub crisis_exceedance: Option<f64>,
    /// Set when a crisis window matched too few records to read as more
    /// than descriptive.
    pub crisis_low_n: bool,
}

/// Evaluate one method; `alpha` fixes the pinball level at `1 - alpha`.
pub fn method_metrics(
    records: &[ForecastRecord],
    method: Method,
    alpha: f64,
    rolling_window: usize,
    crisis: Option<(NaiveDate, NaiveDate)>,
) -> MethodMetrics {
    let thresholds: Vec<f64> = records.iter().map(|r| method.threshold(r)).collect();
    let hits: Vec<bool> = records.iter().map(|r| exceeds(r, method)).collect();
    let rate = if records.is_empty() {
        None
    } else {
        Some(hits.iter().filter(|h| **h).count() as f64 / records.len() as f64)
    };
    let pinballs: Vec<f64> = records
        .iter()
        .zip(&thresholds)
        .map(|(r, q)| pinball_loss(r.y_next - q, 1.0 - alpha))
        .collect();
    let rolls = rolling_exceedance(&hits, rolling_window);
    let (crisis_n, crisis_rate) = match crisis {
        None => (0, None),
        Some(window) => {
            let idx = crisis_indices(records, window);
            let rate = if idx.is_empty() {
                None
            } else {
                Some(idx.iter().filter(|i| hits[**i]).count() as f64 / idx.len() as f64)
            };
            (idx.len(), rate)
        }
    };
    MethodMetrics {
        method: method.as_str().to_string(),
        n: records.len(),
        exceedance_rate: rate,
        mean_threshold: mean(&thresholds),
        mean_pinball: mean(&pinballs),
        max_rolling_exceedance: rolls.iter().copied().max_by(f64::total_cmp),
        crisis_n,
        crisis_exceedance: crisis_rate,
        crisis_low_n: crisis_n > 0 && crisis_n < CRISIS_MIN_N,
    }
}

/// One row of the marking-policy ablation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// Record stream: `strict`, `robust_strict_dates`, or `robust_full`.
    pub setting: String,
    pub method: String,
    pub n: usize,
    pub exceedance_rate: Option<f64>,
    pub mean_threshold: Option<f64>,
    pub crisis_n: usize,
    pub crisis_exceedance: Option<f64>,
}

fn ablation_row(
    setting: &str,
    records: &[ForecastRecord],
    method: Method,
    alpha: f64,
    rolling_window: usize,
    crisis: Option<(NaiveDate, NaiveDate)>,
) -> AblationRow {
    let m = method_metrics(records, method, alpha, rolling_window, crisis);
    AblationRow {
        setting: setting.to_string(),
        method: m.method,
        n: m.n,
        exceedance_rate: m.exceedance_rate,
        mean_threshold: m.mean_threshold,
        crisis_n: m.crisis_n,
        crisis_exceedance: m.crisis_exceedance,
    }
}

/// Six-row comparison: every method on the strict stream, then the
/// recalibrated method on the robust stream restricted to strict dates and
/// on the full robust stream.
///
/// Fails with an alignment error naming the divergent dates if some strict
/// prediction date is missing from the robust stream — robust marking is
/// supposed to cover every strictly markable date.
pub fn ablation(
    strict: &[ForecastRecord],
    robust: &[ForecastRecord],
    alpha: f64,
    rolling_window: usize,
    crisis: Option<(NaiveDate, NaiveDate)>,
) -> Result<Vec<AblationRow>> {
    let robust_dates: BTreeSet<NaiveDate> = robust.iter().map(|r| r.date).collect();
    let missing: Vec<NaiveDate> = strict
        .iter()
        .map(|r| r.date)
        .filter(|d| !robust_dates.contains(d))
        .collect();
    if !missing.is_empty() {
        let shown: Vec<String> = missing.iter().take(5).map(|d| d.to_string()).collect();
        return Err(Error::Alignment(format!(
            "{} strict prediction dates missing from the robust stream (first: {})",
            missing.len(),
            shown.join(", ")
        )));
    }
    let strict_dates: BTreeSet<NaiveDate> = strict.iter().map(|r| r.date).collect();
    let robust_on_strict: Vec<ForecastRecord> = robust
        .iter()
        .filter(|r| strict_dates.contains(&r.date))
        .cloned()
        .collect();

    let mut rows = Vec::with_capacity(6);
    for method in Method::all() {
        rows.push(ablation_row("strict", strict, method, alpha, rolling_window, crisis));
    }
    rows.push(ablation_row(
        "robust_strict_dates",
        &robust_on_strict,
        Method::Conformal,
        alpha,
        rolling_window,
        crisis,
    ));
    rows.push(ablation_row("robust_full", robust, Method::Conformal, alpha, rolling_window, crisis));
    Ok(rows)
}

/// Data-quality and pipeline bookkeeping across the two policy runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationalStats {
    pub strict_predictions: usize,
    pub robust_predictions: usize,
    /// Share of robust prediction dates the strict policy retains.
    pub strict_retention: Option<f64>,
    /// Share of robust option-leg marks below the exact levels.
    pub fallback_share: Option<f64>,
    /// Robust records whose raw learner threshold was negative.
    pub negative_base_raw: usize,
    /// Robust records where the floor lifted the recalibrated threshold.
    pub core_below_floor: usize,
    pub regime_counts: BTreeMap<String, usize>,
    pub skips_strict: BTreeMap<String, usize>,
    pub skips_robust: BTreeMap<String, usize>,
    pub fit_failures_strict: usize,
    pub fit_failures_robust: usize,
}

/// Full per-book evaluation: headline metrics on the robust stream, the
/// policy ablation, and operational counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BookReport {
    pub book: String,
    pub alpha: f64,
    pub methods: Vec<MethodMetrics>,
    pub ablation: Vec<AblationRow>,
    pub operational: OperationalStats,
}

pub fn assemble_report(
    strict: &RunOutput,
    robust: &RunOutput,
    settings: &RunSettings,
) -> Result<BookReport> {
    debug_assert_eq!(strict.book_type, robust.book_type);
    let alpha = settings.train.alpha;
    let methods = Method::all()
        .into_iter()
        .map(|m| method_metrics(&robust.records, m, alpha, settings.rolling_window, settings.crisis))
        .collect();
    let ablation = ablation(
        &strict.records,
        &robust.records,
        alpha,
        settings.rolling_window,
        settings.crisis,
    )?;

    let mut regime_counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in &robust.records {
        *regime_counts.entry(r.regime.as_str().to_string()).or_insert(0) += 1;
    }
    let total_marks: usize = robust.records.iter().map(|r| r.mode_counts.total()).sum();
    let fallback_marks: usize = robust
        .records
        .iter()
        .map(|r| r.mode_counts.interpolated + r.mode_counts.fallback)
        .sum();
    let floor = settings.train.floor;
    let operational = OperationalStats {
        strict_predictions: strict.records.len(),
        robust_predictions: robust.records.len(),
        strict_retention: if robust.records.is_empty() {
            None
        } else {
            Some(strict.records.len() as f64 / robust.records.len() as f64)
        },
        fallback_share: if total_marks == 0 {
            None
        } else {
            Some(fallback_marks as f64 / total_marks as f64)
        },
        negative_base_raw: robust.records.iter().filter(|r| r.q_base < 0.0).count(),
        core_below_floor: robust
            .records
            .iter()
            .filter(|r| floor.map_or(false, |f| r.q_core < f))
            .count(),
        regime_counts,
        skips_strict: strict.skips.clone(),
        skips_robust: robust.skips.clone(),
        fit_failures_strict: strict.fit_failures,
        fit_failures_robust: robust.fit_failures,
    };
    Ok(BookReport {
        book: strict.book_type.as_str().to_string(),
        alpha,
        methods,
        ablation,
        operational,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::LearnerKind;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, StudentT};

    fn d(offset: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(offset as u64)
    }

    fn row(i: i64, y: f64, x: Vec<Option<f64>>) -> PanelRow {
        PanelRow {
            date: d(i),
            y_next: y,
            x,
            distortion_bound: Some(0.0),
            strict_ok: true,
            mode_counts: ModeCounts { exact: 2, ..ModeCounts::default() },
        }
    }

    fn fast_settings() -> RunSettings {
        let mut s = RunSettings::default();
        s.learner.kind = LearnerKind::Linear;
        s
    }

    #[test]
    fn constant_losses_never_exceed() {
        let panel: Vec<PanelRow> =
            (0..90).map(|i| row(i, 0.05, vec![Some(i as f64), Some(1.0)])).collect();
        let out = run_forecast_loop(&panel, &fast_settings()).unwrap();
        assert_eq!(out.warmup_rows, 60);
        assert_eq!(out.records.len(), 30);
        for r in &out.records {
            assert!((r.q_base - 0.05).abs() < 1e-9);
            assert!(!exceeds(r, Method::Conformal));
            assert!(!exceeds(r, Method::Historical));
        }
    }

    #[test]
    fn refit_cadence_counts_fits() {
        let panel: Vec<PanelRow> =
            (0..80).map(|i| row(i, (i % 5) as f64 * 0.01, vec![Some(i as f64)])).collect();
        let out = run_forecast_loop(&panel, &fast_settings()).unwrap();
        // Predictions at rows 60..79; fits at 60, 65, 70, 75.
        assert_eq!(out.records.len(), 20);
        assert_eq!(out.fits, 4);
        assert_eq!(out.fit_failures, 0);
    }

    #[test]
    fn forecast_loop_is_deterministic() {
        let mut rng = StdRng::seed_from_u64(7);
        let panel: Vec<PanelRow> = (0..150)
            .map(|i| {
                row(i, rng.gen_range(0.0..0.3), vec![Some(rng.gen_range(-1.0..1.0)), None])
            })
            .collect();
        let a = run_forecast_loop(&panel, &fast_settings()).unwrap();
        let b = run_forecast_loop(&panel, &fast_settings()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn iid_heavy_tails_recalibrate_to_target() {
        let mut rng = StdRng::seed_from_u64(42);
        let t3 = StudentT::new(3.0).unwrap();
        let panel: Vec<PanelRow> = (0..2000)
            .map(|i| {
                let y = 0.02 + 0.05 * t3.sample(&mut rng);
                row(i, y, vec![Some(rng.gen_range(-1.0..1.0)), Some(rng.gen_range(-1.0..1.0))])
            })
            .collect();
        let settings = fast_settings();
        let out = run_forecast_loop(&panel, &settings).unwrap();
        assert!(out.records.len() >= 1900);
        let m = method_metrics(&out.records, Method::Conformal, 0.10, 50, None);
        let rate = m.exceedance_rate.unwrap();
        assert!(
            (rate - 0.10).abs() < 0.02,
            "conformal exceedance {rate} strays from 0.10"
        );
    }

    #[test]
    fn rolling_means_cover_full_windows_only() {
        let hits = [true, false, false, true];
        assert_eq!(rolling_exceedance(&hits, 2), vec![0.5, 0.0, 0.5]);
        assert_eq!(rolling_exceedance(&hits, 5), Vec::<f64>::new());
        assert_eq!(rolling_exceedance(&hits, 4), vec![0.5]);
    }

    #[test]
    fn crisis_slice_is_inclusive_and_flagged_when_thin() {
        let records: Vec<ForecastRecord> = (0..100)
            .map(|i| ForecastRecord {
                date: d(i),
                y_next: if i % 10 == 0 { 1.0 } else { 0.0 },
                q_base: 0.5,
                q_hist: 0.5,
                q_ref: 0.5,
                buffer: 0.0,
                regime: BufferRegime::Zero,
                n_recent: 0,
                n_total: 0,
                q_core: 0.5,
                q_rep: 0.5,
                mode_counts: ModeCounts::default(),
                strict_ok: true,
                distortion_bound: None,
            })
            .collect();
        let window = (d(10), d(19));
        assert_eq!(crisis_indices(&records, window).len(), 10);
        let m = method_metrics(&records, Method::Conformal, 0.10, 50, Some(window));
        assert_eq!(m.crisis_n, 10);
        assert_eq!(m.crisis_exceedance, Some(0.1));
        assert!(m.crisis_low_n);
        assert_eq!(m.exceedance_rate, Some(0.1));
    }

    #[test]
    fn ablation_demands_date_alignment() {
        let rec = |i: i64| ForecastRecord {
            date: d(i),
            y_next: 0.0,
            q_base: 0.1,
            q_hist: 0.1,
            q_ref: 0.1,
            buffer: 0.0,
            regime: BufferRegime::Zero,
            n_recent: 0,
            n_total: 0,
            q_core: 0.1,
            q_rep: 0.1,
            mode_counts: ModeCounts::default(),
            strict_ok: true,
            distortion_bound: None,
        };
        let strict: Vec<ForecastRecord> = (0..5).map(rec).collect();
        let robust: Vec<ForecastRecord> = (0..10).map(rec).collect();
        let rows = ablation(&strict, &robust, 0.10, 50, None).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0].setting, "strict");
        assert_eq!(rows[4].setting, "robust_strict_dates");
        assert_eq!(rows[4].n, 5);
        assert_eq!(rows[5].setting, "robust_full");
        assert_eq!(rows[5].n, 10);

        // A strict date the robust stream lacks is a hard error.
        let strict_extra: Vec<ForecastRecord> = (8..12).map(rec).collect();
        let err = ablation(&strict_extra, &robust, 0.10, 50, None).unwrap_err();
        assert!(err.to_string().contains("2020-01-11"));
    }

    #[test]
    fn retention_and_fallback_share_in_report() {
        let mk_out = |n: i64, policy: MarkPolicy, fallback: bool| RunOutput {
            book_type: BookType::AtmStraddle,
            policy,
            panel: Vec::new(),
            records: (0..n)
                .map(|i| ForecastRecord {
                    date: d(i),
                    y_next: 0.0,
                    q_base: -0.1,
                    q_hist: 0.1,
                    q_ref: 0.0,
                    buffer: 0.0,
                    regime: BufferRegime::Weighted,
                    n_recent: 30,
                    n_total: 30,
                    q_core: 0.0,
                    q_rep: 0.0,
                    mode_counts: ModeCounts {
                        exact: 2,
                        contract: 0,
                        interpolated: if fallback { 1 } else { 0 },
                        fallback: if fallback { 1 } else { 0 },
                    },
                    strict_ok: !fallback,
                    distortion_bound: None,
                })
                .collect(),
            skips: BTreeMap::new(),
            warmup_rows: 0,
            no_model_rows: 0,
            fit_failures: 0,
            fits: 1,
        };
        let strict = mk_out(6, MarkPolicy::Strict, false);
        let robust = mk_out(8, MarkPolicy::Robust, true);
        let report = assemble_report(&strict, &robust, &RunSettings::default()).unwrap();
        assert_eq!(report.operational.strict_retention, Some(0.75));
        assert_eq!(report.operational.fallback_share, Some(0.5));
        assert_eq!(report.operational.negative_base_raw, 8);
        assert_eq!(report.methods.len(), 4);
        assert_eq!(report.ablation.len(), 6);
        assert_eq!(report.operational.regime_counts.get("weighted"), Some(&8));
    }
}

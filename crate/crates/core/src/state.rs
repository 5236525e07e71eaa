//! Daily state features: surface shape, chain quality, spot-path statistics,
//! and volatility-index levels, plus short-horizon changes of the key levels.
//!
//! Everything here is computed from data dated at or before the target day;
//! fields that need history (returns windows, changes) stay missing until
//! enough days have accumulated.

use chrono::NaiveDate;

use crate::chain::{ChainSnapshot, ChainStore, OptType, OptionQuote};

/// Target maturities (calendar days) for the near and far surface buckets.
pub const NEAR_DTE_TARGET: i64 = 30;
pub const FAR_DTE_TARGET: i64 = 90;
/// Absolute delta targeted by the wing selections.
pub const WING_DELTA: f64 = 0.25;
/// Trailing window (trading days) for realized-variance statistics.
pub const REALIZED_WINDOW: usize = 21;
/// Trailing window (trading days) for the drawdown reference maximum.
pub const DRAWDOWN_WINDOW: usize = 252;

/// Feature vector for one trading day. `None` marks a feature that could not
/// be computed from the available history; downstream imputation owns that.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub date: NaiveDate,
    pub atm_iv: Option<f64>,
    pub skew_25d: Option<f64>,
    pub term_slope: Option<f64>,
    pub smile_curvature: Option<f64>,
    pub avg_open_interest: Option<f64>,
    pub avg_volume: Option<f64>,
    pub avg_rel_spread: Option<f64>,
    pub spot_ret_1d: Option<f64>,
    pub abs_ret_1d: Option<f64>,
    pub realized_vol_21d: Option<f64>,
    pub drawdown: Option<f64>,
    pub downside_semivar_21d: Option<f64>,
    pub vix: Option<f64>,
    pub vxv: Option<f64>,
    pub vix_vxv_spread: Option<f64>,
    pub atm_iv_chg_1d: Option<f64>,
    pub atm_iv_chg_5d: Option<f64>,
    pub skew_25d_chg_1d: Option<f64>,
    pub skew_25d_chg_5d: Option<f64>,
    pub vix_chg_1d: Option<f64>,
    pub vix_chg_5d: Option<f64>,
}

/// Column names for [`StateVector::feature_values`], in order.
pub const STATE_FEATURE_NAMES: [&str; 21] = [
    "atm_iv",
    "skew_25d",
    "term_slope",
    "smile_curvature",
    "avg_open_interest",
    "avg_volume",
    "avg_rel_spread",
    "spot_ret_1d",
    "abs_ret_1d",
    "realized_vol_21d",
    "drawdown",
    "downside_semivar_21d",
    "vix",
    "vxv",
    "vix_vxv_spread",
    "atm_iv_chg_1d",
    "atm_iv_chg_5d",
    "skew_25d_chg_1d",
    "skew_25d_chg_5d",
    "vix_chg_1d",
    "vix_chg_5d",
];

impl StateVector {
    /// Numeric view in [`STATE_FEATURE_NAMES`] order.
    pub fn feature_values(&self) -> Vec<Option<f64>> {
        vec![
            self.atm_iv,
            self.skew_25d,
            self.term_slope,
            self.smile_curvature,
            self.avg_open_interest,
            self.avg_volume,
            self.avg_rel_spread,
            self.spot_ret_1d,
            self.abs_ret_1d,
            self.realized_vol_21d,
            self.drawdown,
            self.downside_semivar_21d,
            self.vix,
            self.vxv,
            self.vix_vxv_spread,
            self.atm_iv_chg_1d,
            self.atm_iv_chg_5d,
            self.skew_25d_chg_1d,
            self.skew_25d_chg_5d,
            self.vix_chg_1d,
            self.vix_chg_5d,
        ]
    }
}

/// Surface levels of one day that feed the change features.
#[derive(Debug, Clone, Copy, Default)]
struct SurfaceLevels {
    atm_iv: Option<f64>,
    skew_25d: Option<f64>,
    term_slope: Option<f64>,
    smile_curvature: Option<f64>,
}

/// Expiry whose maturity is nearest `target_dte`; ties take the shorter one.
fn bucket_expiry(snapshot: &ChainSnapshot, date: NaiveDate, target_dte: i64) -> Option<NaiveDate> {
    snapshot
        .expiries()
        .into_iter()
        .min_by_key(|e| {
            let dte = (*e - date).num_days();
            ((dte - target_dte).abs(), dte)
        })
}

/// Quote closest to the money in a bucket: smallest |k|, then smaller
/// strike, then calls before puts.
fn atm_quote<'a>(quotes: &[&'a OptionQuote]) -> Option<&'a OptionQuote> {
    quotes
        .iter()
        .min_by(|a, b| {
            let ka = (a.k.abs(), a.strike, type_rank(a.opt_type));
            let kb = (b.k.abs(), b.strike, type_rank(b.opt_type));
            ka.0
                .total_cmp(&kb.0)
                .then(ka.1.total_cmp(&kb.1))
                .then(ka.2.cmp(&kb.2))
        })
        .copied()
}

fn type_rank(t: OptType) -> u8 {
    match t {
        OptType::Call => 0,
        OptType::Put => 1,
    }
}

/// Quote of `opt_type` whose |delta| is nearest `target`; ties take the
/// smaller strike. Quotes without a delta are not candidates.
fn wing_quote<'a>(
    quotes: &[&'a OptionQuote],
    opt_type: OptType,
    target: f64,
) -> Option<&'a OptionQuote> {
    quotes
        .iter()
        .filter(|q| q.opt_type == opt_type && q.delta.is_some())
        .min_by(|a, b| {
            let da = (a.delta.unwrap().abs() - target).abs();
            let db = (b.delta.unwrap().abs() - target).abs();
            da.total_cmp(&db).then(a.strike.total_cmp(&b.strike))
        })
        .copied()
}

fn surface_levels(snapshot: &ChainSnapshot, date: NaiveDate) -> SurfaceLevels {
    let near_expiry = match bucket_expiry(snapshot, date, NEAR_DTE_TARGET) {
        Some(e) => e,
        None => return SurfaceLevels::default(),
    };
    let near = snapshot.quotes_for_expiry(near_expiry);
    let atm = atm_quote(&near).map(|q| q.iv);
    let put25 = wing_quote(&near, OptType::Put, WING_DELTA).map(|q| q.iv);
    let call25 = wing_quote(&near, OptType::Call, WING_DELTA).map(|q| q.iv);
    let skew = match (put25, call25) {
        (Some(p), Some(c)) => Some(p - c),
        _ => None,
    };
    let curvature = match (put25, call25, atm) {
        (Some(p), Some(c), Some(a)) => Some(0.5 * (p + c) - a),
        _ => None,
    };
    let far_atm = bucket_expiry(snapshot, date, FAR_DTE_TARGET)
        .map(|e| snapshot.quotes_for_expiry(e))
        .as_deref()
        .and_then(atm_quote)
        .map(|q| q.iv);
    let term_slope = match (atm, far_atm) {
        (Some(n), Some(f)) => Some(f - n),
        _ => None,
    };
    SurfaceLevels { atm_iv: atm, skew_25d: skew, term_slope, smile_curvature: curvature }
}

fn diff(now: Option<f64>, then: Option<f64>) -> Option<f64> {
    match (now, then) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    }
}

/// Build the state vector for `store.day(idx)` using only days `0..=idx`.
pub fn build_state(store: &ChainStore, idx: usize) -> StateVector {
    let day = store.day(idx);
    let date = day.market.date;
    let levels = surface_levels(&day.clean, date);
    let levels_1d = idx
        .checked_sub(1)
        .map(|i| surface_levels(&store.day(i).clean, store.day(i).market.date));
    let levels_5d = idx
        .checked_sub(5)
        .map(|i| surface_levels(&store.day(i).clean, store.day(i).market.date));

    // Chain-quality averages over the whole cleaned snapshot.
    let n = day.clean.len();
    let (avg_oi, avg_vol, avg_spread) = if n > 0 {
        let mut oi = 0.0;
        let mut vol = 0.0;
        let mut spread = 0.0;
        for q in day.clean.iter() {
            oi += q.open_interest as f64;
            vol += q.volume as f64;
            spread += q.rel_spread();
        }
        let nf = n as f64;
        (Some(oi / nf), Some(vol / nf), Some(spread / nf))
    } else {
        (None, None, None)
    };

    // Spot-path statistics over trading-day history.
    let spots: Vec<f64> = (0..=idx).map(|i| store.day(i).market.spot).collect();
    let ret_1d = if idx >= 1 {
        Some((spots[idx] / spots[idx - 1]).ln())
    } else {
        None
    };
    let returns: Vec<f64> = spots.windows(2).map(|w| (w[1] / w[0]).ln()).collect();
    let (rv21, semivar21) = if returns.len() >= REALIZED_WINDOW {
        let tail = &returns[returns.len() - REALIZED_WINDOW..];
        let mean_sq = tail.iter().map(|r| r * r).sum::<f64>() / REALIZED_WINDOW as f64;
        let mean_downside_sq = tail
            .iter()
            .map(|r| if *r < 0.0 { r * r } else { 0.0 })
            .sum::<f64>()
            / REALIZED_WINDOW as f64;
        (Some((252.0 * mean_sq).sqrt()), Some(252.0 * mean_downside_sq))
    } else {
        (None, None)
    };
    let dd_start = (idx + 1).saturating_sub(DRAWDOWN_WINDOW);
    let trailing_max = spots[dd_start..=idx]
        .iter()
        .fold(f64::NEG_INFINITY, |m, s| m.max(*s));
    let drawdown = Some(spots[idx] / trailing_max - 1.0);

    let vix = day.market.vix;
    let vxv = day.market.vxv;
    let vix_1d = idx.checked_sub(1).and_then(|i| store.day(i).market.vix);
    let vix_5d = idx.checked_sub(5).and_then(|i| store.day(i).market.vix);

    StateVector {
        date,
        atm_iv: levels.atm_iv,
        skew_25d: levels.skew_25d,
        term_slope: levels.term_slope,
        smile_curvature: levels.smile_curvature,
        avg_open_interest: avg_oi,
        avg_volume: avg_vol,
        avg_rel_spread: avg_spread,
        spot_ret_1d: ret_1d,
        abs_ret_1d: ret_1d.map(f64::abs),
        realized_vol_21d: rv21,
        drawdown,
        downside_semivar_21d: semivar21,
        vix,
        vxv,
        vix_vxv_spread: diff(vix, vxv),
        atm_iv_chg_1d: diff(levels.atm_iv, levels_1d.and_then(|l| l.atm_iv)),
        atm_iv_chg_5d: diff(levels.atm_iv, levels_5d.and_then(|l| l.atm_iv)),
        skew_25d_chg_1d: diff(levels.skew_25d, levels_1d.and_then(|l| l.skew_25d)),
        skew_25d_chg_5d: diff(levels.skew_25d, levels_5d.and_then(|l| l.skew_25d)),
        vix_chg_1d: diff(vix, vix_1d),
        vix_chg_5d: diff(vix, vix_5d),
    }
}

/// State vectors for every day of the store, each causal in its own prefix.
pub fn build_states(store: &ChainStore) -> Vec<StateVector> {
    (0..store.len()).map(|i| build_state(store, i)).collect()
}

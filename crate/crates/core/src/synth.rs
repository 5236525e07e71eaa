//! Seeded synthetic option market with regime-switching volatility.
//!
//! The generator draws a two-state (calm/stressed) Markov regime path, a
//! lognormal spot path whose volatility follows the regime, and a per-day
//! surface level shock. Quotes are exact model prices on a fixed absolute
//! strike grid with weekly expiries, symmetric spreads, and analytic deltas,
//! so every downstream quantity has a closed form. Two independent RNG
//! streams keep the market path identical when only the listing-deletion
//! probability changes, and each day retains the true next-day mid of every
//! contract it listed — including contracts that vanish from the next day's
//! listing.

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::chain::{ChainStore, MarketDay, OptType, QuoteKey, RawQuote, ZeroCurve};
use crate::error::Result;
use crate::pricing;

/// Trading-day fraction for one calendar-day spot step.
const SPOT_DT: f64 = 1.0 / 252.0;
/// Lowest admissible surface level.
const IV_FLOOR: f64 = 0.01;
/// Strike grid coverage around the day's spot.
const STRIKE_LO_FRAC: f64 = 0.78;
const STRIKE_HI_FRAC: f64 = 1.13;
/// 3-month proxy index premium over the 1-month proxy, by regime.
const VXV_CALM_RATIO: f64 = 1.05;
const VXV_STRESSED_RATIO: f64 = 0.92;

/// Volatility regime of one day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Calm,
    Stressed,
}

/// Full description of the generated market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_days: usize,
    pub start_date: NaiveDate,
    pub spot0: f64,
    /// Flat continuously compounded zero rate.
    pub rate: f64,
    pub div_yield: f64,
    /// Surface level by regime (before the daily shock).
    pub sigma_calm: f64,
    pub sigma_stressed: f64,
    /// Daily regime transition probabilities.
    pub p_calm_to_stress: f64,
    pub p_stress_to_calm: f64,
    /// Surface slope in log-forward moneyness, by regime.
    pub skew_calm: f64,
    pub skew_stressed: f64,
    /// Standard deviation of the daily multiplicative level shock
    /// (`level = sigma * exp(shock)`).
    pub vol_jitter: f64,
    /// Multiplier on the regime volatility in the spot step; zero freezes
    /// the spot while the surface stays alive.
    pub spot_vol_scale: f64,
    /// Strikes are the absolute multiples of this spacing inside the
    /// day's coverage window, so a contract keeps its strike across days.
    pub strike_spacing: f64,
    /// Weekly expiries out to this many weeks, anchored at `start_date`.
    pub max_expiry_weeks: usize,
    /// Full relative bid/ask spread; the mid stays the exact model price.
    pub spread_frac: f64,
    /// Per-day, per-contract probability of being absent from the listing.
    pub missing_prob: f64,
    /// Inclusive window of forced stress, for reproducible crisis studies.
    pub crisis: Option<(NaiveDate, NaiveDate)>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 17,
            n_days: 700,
            start_date: NaiveDate::from_ymd_opt(2018, 1, 2).unwrap(),
            spot0: 4000.0,
            rate: 0.02,
            div_yield: 0.015,
            sigma_calm: 0.12,
            sigma_stressed: 0.42,
            p_calm_to_stress: 0.025,
            p_stress_to_calm: 0.10,
            skew_calm: -0.25,
            skew_stressed: -0.50,
            vol_jitter: 0.10,
            spot_vol_scale: 1.0,
            strike_spacing: 25.0,
            max_expiry_weeks: 20,
            spread_frac: 0.03,
            missing_prob: 0.03,
            crisis: None,
        }
    }
}

/// One generated day.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDay {
    pub market: MarketDay,
    pub regime: Regime,
    pub quotes: Vec<RawQuote>,
    /// True next-day mid for every contract listed today, keyed like the
    /// chain; empty on the final day.
    pub next_true_mids: BTreeMap<QuoteKey, f64>,
}

/// The generated market plus the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthMarket {
    pub config: SynthConfig,
    pub days: Vec<SynthDay>,
}

impl SynthMarket {
    pub fn markets(&self) -> Vec<MarketDay> {
        self.days.iter().map(|d| d.market.clone()).collect()
    }

    pub fn all_quotes(&self) -> Vec<RawQuote> {
        self.days.iter().flat_map(|d| d.quotes.iter().cloned()).collect()
    }

    /// Hand the generated rows to the ingestion pipeline.
    pub fn into_store(self) -> Result<ChainStore> {
        let markets = self.markets();
        let quotes: Vec<RawQuote> = self.days.into_iter().flat_map(|d| d.quotes).collect();
        ChainStore::build(quotes, markets)
    }
}

/// Per-day latent state, fixed before any listing is drawn.
struct DayState {
    date: NaiveDate,
    spot: f64,
    regime: Regime,
    /// Multiplicative surface shock `exp(N(0, vol_jitter))`.
    level_shock: f64,
}

fn regime_sigma(cfg: &SynthConfig, regime: Regime) -> f64 {
    match regime {
        Regime::Calm => cfg.sigma_calm,
        Regime::Stressed => cfg.sigma_stressed,
    }
}

fn regime_skew(cfg: &SynthConfig, regime: Regime) -> f64 {
    match regime {
        Regime::Calm => cfg.skew_calm,
        Regime::Stressed => cfg.skew_stressed,
    }
}

/// Surface level (ATM-forward volatility) for one day state.
fn surface_level(cfg: &SynthConfig, state: &DayState) -> f64 {
    regime_sigma(cfg, state.regime) * state.level_shock
}

/// Implied volatility at log-forward moneyness `k`.
fn surface_iv(cfg: &SynthConfig, state: &DayState, k: f64) -> f64 {
    (surface_level(cfg, state) + regime_skew(cfg, state.regime) * k).max(IV_FLOOR)
}

/// Model mid for a contract under one day state.
fn true_mid(cfg: &SynthConfig, state: &DayState, expiry: NaiveDate, opt_type: OptType, strike: f64) -> f64 {
    let dte = (expiry - state.date).num_days();
    let tau = dte as f64 / 365.0;
    let fwd = state.spot * ((cfg.rate - cfg.div_yield) * tau).exp();
    let iv = surface_iv(cfg, state, (strike / fwd).ln());
    match opt_type {
        OptType::Call => pricing::call_price(state.spot, strike, tau, cfg.rate, cfg.div_yield, iv),
        OptType::Put => pricing::put_price(state.spot, strike, tau, cfg.rate, cfg.div_yield, iv),
    }
}

fn true_delta(cfg: &SynthConfig, state: &DayState, expiry: NaiveDate, opt_type: OptType, strike: f64) -> f64 {
    let dte = (expiry - state.date).num_days();
    let tau = dte as f64 / 365.0;
    let fwd = state.spot * ((cfg.rate - cfg.div_yield) * tau).exp();
    let iv = surface_iv(cfg, state, (strike / fwd).ln());
    match opt_type {
        OptType::Call => pricing::call_delta(state.spot, strike, tau, cfg.rate, cfg.div_yield, iv),
        OptType::Put => pricing::put_delta(state.spot, strike, tau, cfg.rate, cfg.div_yield, iv),
    }
}

/// Deterministic liquidity profile: densest at the money.
fn liquidity(spot: f64, strike: f64) -> (u64, u64) {
    let m = (strike / spot).ln();
    let oi = (5000.0 * (-40.0 * m * m).exp()).round() as u64 + 50;
    (oi, oi / 4 + 1)
}

/// Absolute weekly expiry grid anchored at the start date.
fn expiries_for(cfg: &SynthConfig, day_index: usize) -> Vec<NaiveDate> {
    let horizon = cfg.max_expiry_weeks as i64 * 7;
    let mut out = Vec::new();
    for week in 1.. {
        let offset = week * 7;
        let dte = offset - day_index as i64;
        if dte > horizon {
            break;
        }
        if dte >= 1 {
            out.push(cfg.start_date + Days::new(offset as u64));
        }
    }
    out
}

/// Strike multiples covering the day's window.
fn strikes_for(cfg: &SynthConfig, spot: f64) -> Vec<f64> {
    let lo = (STRIKE_LO_FRAC * spot / cfg.strike_spacing).ceil() as i64;
    let hi = (STRIKE_HI_FRAC * spot / cfg.strike_spacing).floor() as i64;
    (lo..=hi).map(|m| m as f64 * cfg.strike_spacing).collect()
}

/// Generate the market. Draw order is fixed: the market stream consumes one
/// regime uniform, one spot normal, and one level normal per day (always,
/// even when a crisis override or a zero scale ignores the value), and the
/// listing stream consumes one uniform per candidate contract in
/// expiry-ascending, strike-ascending, call-before-put order.
pub fn generate(cfg: &SynthConfig) -> SynthMarket {
    assert!(cfg.n_days >= 2, "need at least two days");
    assert!(cfg.strike_spacing > 0.0 && cfg.spot0 > 0.0);
    assert!((0.0..=1.0).contains(&cfg.missing_prob));
    let mut market_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut listing_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9E37_79B9_7F4A_7C15);

    // Latent path first, so listings cannot perturb it.
    let mut states: Vec<DayState> = Vec::with_capacity(cfg.n_days);
    let mut regime = Regime::Calm;
    let mut spot = cfg.spot0;
    for i in 0..cfg.n_days {
        let date = cfg.start_date + Days::new(i as u64);
        let u: f64 = market_rng.gen();
        let z: f64 = StandardNormal.sample(&mut market_rng);
        let shock_z: f64 = StandardNormal.sample(&mut market_rng);
        if i > 0 {
            regime = match regime {
                Regime::Calm if u < cfg.p_calm_to_stress => Regime::Stressed,
                Regime::Stressed if u < cfg.p_stress_to_calm => Regime::Calm,
                r => r,
            };
        }
        let mut effective = regime;
        if let Some((lo, hi)) = cfg.crisis {
            if date >= lo && date <= hi {
                effective = Regime::Stressed;
            }
        }
        if i > 0 && cfg.spot_vol_scale > 0.0 {
            let sigma = regime_sigma(cfg, effective) * cfg.spot_vol_scale;
            let drift = (cfg.rate - cfg.div_yield - 0.5 * sigma * sigma) * SPOT_DT;
            spot *= (drift + sigma * SPOT_DT.sqrt() * z).exp();
        }
        states.push(DayState {
            date,
            spot,
            regime: effective,
            level_shock: (cfg.vol_jitter * shock_z).exp(),
        });
    }

    let mut days: Vec<SynthDay> = Vec::with_capacity(cfg.n_days);
    for (i, state) in states.iter().enumerate() {
        let mut quotes: Vec<RawQuote> = Vec::new();
        for expiry in expiries_for(cfg, i) {
            for strike in strikes_for(cfg, state.spot) {
                for opt_type in [OptType::Call, OptType::Put] {
                    let listed = listing_rng.gen::<f64>() >= cfg.missing_prob;
                    if !listed {
                        continue;
                    }
                    let mid = true_mid(cfg, state, expiry, opt_type, strike);
                    let half = 0.5 * cfg.spread_frac * mid;
                    let dte = (expiry - state.date).num_days();
                    let tau = dte as f64 / 365.0;
                    let fwd = state.spot * ((cfg.rate - cfg.div_yield) * tau).exp();
                    let iv = surface_iv(cfg, state, (strike / fwd).ln());
                    let (oi, volume) = liquidity(state.spot, strike);
                    quotes.push(RawQuote {
                        trade_date: state.date,
                        expiry,
                        strike,
                        opt_type,
                        bid: mid - half,
                        ask: mid + half,
                        iv: Some(iv),
                        delta: Some(true_delta(cfg, state, expiry, opt_type, strike)),
                        open_interest: oi,
                        volume,
                    });
                }
            }
        }

        let level = surface_level(cfg, state);
        let vix = 100.0 * level;
        let vxv_ratio = match state.regime {
            Regime::Calm => VXV_CALM_RATIO,
            Regime::Stressed => VXV_STRESSED_RATIO,
        };
        let market = MarketDay {
            date: state.date,
            spot: state.spot,
            curve: ZeroCurve::flat(cfg.rate),
            div_yield: cfg.div_yield,
            vix: Some(vix),
            vxv: Some(vix * vxv_ratio),
        };

        let next_true_mids = if i + 1 < states.len() {
            let next = &states[i + 1];
            quotes
                .iter()
                .map(|q| (q.key(), true_mid(cfg, next, q.expiry, q.opt_type, q.strike)))
                .collect()
        } else {
            BTreeMap::new()
        };

        days.push(SynthDay { market, regime: state.regime, quotes, next_true_mids });
    }

    SynthMarket { config: cfg.clone(), days }
}

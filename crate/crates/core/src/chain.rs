//! Option-chain ingestion: raw quote rows, zero curves, per-day market data,
//! the liquidity/moneyness cleaning pass, and the indexed per-day store the
//! rest of the pipeline reads from.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Calendar-day maturity window retained by the cleaning pass (inclusive).
pub const DTE_MIN: i64 = 14;
pub const DTE_MAX: i64 = 120;
/// Log-forward-moneyness window retained by the cleaning pass (inclusive).
pub const K_MIN: f64 = -0.20;
pub const K_MAX: f64 = 0.10;

/// Whether a log-forward-moneyness value survives the cleaning window.
/// Both edges are inclusive; NaN never qualifies.
pub fn in_moneyness_window(k: f64) -> bool {
    (K_MIN..=K_MAX).contains(&k)
}
/// Quotes with a mid at or below this level are dropped.
pub const MIN_MID: f64 = 0.05;
/// Quotes with (ask - bid) / mid above this level are dropped.
pub const MAX_REL_SPREAD: f64 = 0.50;
/// Minimum open interest + volume for a quote to count as active.
pub const MIN_ACTIVITY: u64 = 1;

/// Call or put.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OptType {
    Call,
    Put,
}

impl OptType {
    pub fn as_str(&self) -> &'static str {
        match self {
            OptType::Call => "C",
            OptType::Put => "P",
        }
    }

    pub fn parse(s: &str) -> Option<OptType> {
        match s.trim() {
            "C" | "c" => Some(OptType::Call),
            "P" | "p" => Some(OptType::Put),
            _ => None,
        }
    }
}

/// Strike usable as an ordered map key. Strikes come from a shared listing
/// grid, so exact float equality is the intended identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrikeKey(pub f64);

impl Eq for StrikeKey {}

impl PartialOrd for StrikeKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for StrikeKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Identity of a listed contract within one trading day.
pub type QuoteKey = (NaiveDate, OptType, StrikeKey);

/// One quote row as it arrives from disk, before any cleaning.
#[derive(Debug, Clone, PartialEq)]
pub struct RawQuote {
    pub trade_date: NaiveDate,
    pub expiry: NaiveDate,
    pub strike: f64,
    pub opt_type: OptType,
    pub bid: f64,
    pub ask: f64,
    pub iv: Option<f64>,
    pub delta: Option<f64>,
    pub open_interest: u64,
    pub volume: u64,
}

impl RawQuote {
    pub fn key(&self) -> QuoteKey {
        (self.expiry, self.opt_type, StrikeKey(self.strike))
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.bid + self.ask)
    }
}

/// A quote that survived cleaning, with derived fields attached.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionQuote {
    pub expiry: NaiveDate,
    pub strike: f64,
    pub opt_type: OptType,
    pub bid: f64,
    pub ask: f64,
    pub mid: f64,
    pub iv: f64,
    pub delta: Option<f64>,
    pub open_interest: u64,
    pub volume: u64,
    /// Calendar days to expiry.
    pub dte: i64,
    /// Year fraction, `dte / 365`.
    pub tau: f64,
    /// Log forward moneyness `ln(strike / forward)`.
    pub k: f64,
}

impl OptionQuote {
    pub fn key(&self) -> QuoteKey {
        (self.expiry, self.opt_type, StrikeKey(self.strike))
    }

    pub fn rel_spread(&self) -> f64 {
        (self.ask - self.bid) / self.mid
    }
}

/// Zero-coupon curve for one date: annualized continuously compounded rates
/// at integer-day tenors, interpolated linearly in the year fraction and
/// extrapolated flat beyond the quoted ends.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ZeroCurve {
    /// `(tenor_days, rate)` sorted by tenor.
    points: Vec<(u32, f64)>,
}

impl ZeroCurve {
    pub fn new(mut points: Vec<(u32, f64)>) -> ZeroCurve {
        points.sort_by_key(|p| p.0);
        points.dedup_by_key(|p| p.0);
        ZeroCurve { points }
    }

    /// Flat curve helper, mostly for tests and synthetic data.
    pub fn flat(rate: f64) -> ZeroCurve {
        ZeroCurve::new(vec![(30, rate), (365, rate)])
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `(tenor_days, rate)` knots, tenor-ascending.
    pub fn points(&self) -> &[(u32, f64)] {
        &self.points
    }

    /// Zero rate at year fraction `tau`, or `None` on an empty curve.
    pub fn rate(&self, tau: f64) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        let t = tau * 365.0;
        let first = self.points[0];
        let last = self.points[self.points.len() - 1];
        if t <= first.0 as f64 {
            return Some(first.1);
        }
        if t >= last.0 as f64 {
            return Some(last.1);
        }
        for w in self.points.windows(2) {
            let (t0, r0) = (w[0].0 as f64, w[0].1);
            let (t1, r1) = (w[1].0 as f64, w[1].1);
            if t >= t0 && t <= t1 {
                let frac = (t - t0) / (t1 - t0);
                return Some(r0 + frac * (r1 - r0));
            }
        }
        Some(last.1)
    }
}

/// Per-date market context: spot, discounting inputs, and the two implied
/// volatility index levels used as state features.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketDay {
    pub date: NaiveDate,
    pub spot: f64,
    pub curve: ZeroCurve,
    pub div_yield: f64,
    pub vix: Option<f64>,
    pub vxv: Option<f64>,
}

impl MarketDay {
    /// Zero rate at `tau`, erroring with the date and horizon when the curve
    /// cannot answer.
    pub fn zero_rate(&self, tau: f64) -> Result<f64> {
        self.curve
            .rate(tau)
            .ok_or(Error::MissingRate { date: self.date, tau })
    }
}

/// Carry-adjusted forward at year fraction `tau` for one market day.
pub fn compute_forward(market: &MarketDay, tau: f64) -> Result<f64> {
    let rate = market.zero_rate(tau)?;
    Ok(market.spot * ((rate - market.div_yield) * tau).exp())
}

/// Drop counts for every stage of the cleaning pass. Rows are tested in the
/// declared order and attributed to the first stage that rejects them, so
/// the counts plus `retained` always reconstruct `raw_rows`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterDiagnostics {
    pub raw_rows: usize,
    pub duplicate: usize,
    pub dte_window: usize,
    pub moneyness_window: usize,
    pub nonpositive_bid: usize,
    pub crossed_quote: usize,
    pub small_mid: usize,
    pub missing_iv: usize,
    pub wide_spread: usize,
    pub inactive: usize,
    pub retained: usize,
}

impl FilterDiagnostics {
    pub fn dropped(&self) -> usize {
        self.duplicate
            + self.dte_window
            + self.moneyness_window
            + self.nonpositive_bid
            + self.crossed_quote
            + self.small_mid
            + self.missing_iv
            + self.wide_spread
            + self.inactive
    }

    /// Accounting identity: every raw row is either dropped once or retained.
    pub fn is_consistent(&self) -> bool {
        self.dropped() + self.retained == self.raw_rows
    }
}

/// Deduplicated pre-filter chain for one day. Keeps the raw quote so the
/// next-day marking pass can fall back to contracts the cleaning pass
/// rejected.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawChain {
    rows: BTreeMap<QuoteKey, RawQuote>,
}

impl RawChain {
    pub fn lookup(&self, key: &QuoteKey) -> Option<&RawQuote> {
        self.rows.get(key)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Cleaned, indexed chain for one trading day.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSnapshot {
    pub date: NaiveDate,
    quotes: BTreeMap<QuoteKey, OptionQuote>,
}

impl ChainSnapshot {
    pub fn len(&self) -> usize {
        self.quotes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quotes.is_empty()
    }

    pub fn lookup(&self, expiry: NaiveDate, opt_type: OptType, strike: f64) -> Option<&OptionQuote> {
        self.quotes.get(&(expiry, opt_type, StrikeKey(strike)))
    }

    /// All quotes in key order (expiry, type, strike).
    pub fn iter(&self) -> impl Iterator<Item = &OptionQuote> {
        self.quotes.values()
    }

    /// Distinct expiries present, ascending.
    pub fn expiries(&self) -> Vec<NaiveDate> {
        let mut out: Vec<NaiveDate> = self.quotes.keys().map(|k| k.0).collect();
        out.dedup();
        out
    }

    /// Quotes for one expiry and type, ascending in strike.
    pub fn quotes_for(&self, expiry: NaiveDate, opt_type: OptType) -> Vec<&OptionQuote> {
        self.quotes
            .range((expiry, opt_type, StrikeKey(f64::NEG_INFINITY))..=(expiry, opt_type, StrikeKey(f64::INFINITY)))
            .map(|(_, q)| q)
            .collect()
    }

    /// Quotes for one expiry, both types, in key order.
    pub fn quotes_for_expiry(&self, expiry: NaiveDate) -> Vec<&OptionQuote> {
        self.quotes
            .range(
                (expiry, OptType::Call, StrikeKey(f64::NEG_INFINITY))
                    ..=(expiry, OptType::Put, StrikeKey(f64::INFINITY)),
            )
            .map(|(_, q)| q)
            .collect()
    }
}

/// Deduplicate raw rows on (expiry, type, strike), keeping the row with the
/// larger open interest, then larger volume, then the first occurrence.
fn dedup_rows(rows: &[RawQuote]) -> (Vec<RawQuote>, usize) {
    let mut kept: BTreeMap<QuoteKey, RawQuote> = BTreeMap::new();
    let mut dropped = 0usize;
    for row in rows {
        match kept.get(&row.key()) {
            None => {
                kept.insert(row.key(), row.clone());
            }
            Some(existing) => {
                let replace = row.open_interest > existing.open_interest
                    || (row.open_interest == existing.open_interest
                        && row.volume > existing.volume);
                if replace {
                    kept.insert(row.key(), row.clone());
                }
                dropped += 1;
            }
        }
    }
    (kept.into_values().collect(), dropped)
}

/// Run the cleaning pass over one day of raw rows.
///
/// Returns the cleaned snapshot, the deduplicated pre-filter chain, and the
/// per-stage drop diagnostics. Every row must be dated `market.date`.
pub fn clean_chain(
    rows: &[RawQuote],
    market: &MarketDay,
) -> Result<(ChainSnapshot, RawChain, FilterDiagnostics)> {
    for row in rows {
        if row.trade_date != market.date {
            return Err(Error::Data(format!(
                "quote dated {} in chain for {}",
                row.trade_date, market.date
            )));
        }
    }

    let mut diag = FilterDiagnostics {
        raw_rows: rows.len(),
        ..FilterDiagnostics::default()
    };

    let (deduped, dup_drops) = dedup_rows(rows);
    diag.duplicate = dup_drops;
    let raw_chain = RawChain {
        rows: deduped.iter().map(|r| (r.key(), r.clone())).collect(),
    };

    let mut quotes: BTreeMap<QuoteKey, OptionQuote> = BTreeMap::new();
    for row in &deduped {
        let dte = (row.expiry - market.date).num_days();
        if !(DTE_MIN..=DTE_MAX).contains(&dte) {
            diag.dte_window += 1;
            continue;
        }
        let tau = dte as f64 / 365.0;
        let fwd = compute_forward(market, tau)?;
        let k = (row.strike / fwd).ln();
        if !in_moneyness_window(k) {
            diag.moneyness_window += 1;
            continue;
        }
        if !(row.bid > 0.0) {
            diag.nonpositive_bid += 1;
            continue;
        }
        if !(row.ask > row.bid) {
            diag.crossed_quote += 1;
            continue;
        }
        let mid = row.mid();
        if !(mid > MIN_MID) {
            diag.small_mid += 1;
            continue;
        }
        let iv = match row.iv {
            Some(v) if v > 0.0 => v,
            _ => {
                diag.missing_iv += 1;
                continue;
            }
        };
        if (row.ask - row.bid) / mid > MAX_REL_SPREAD {
            diag.wide_spread += 1;
            continue;
        }
        if row.open_interest + row.volume < MIN_ACTIVITY {
            diag.inactive += 1;
            continue;
        }
        quotes.insert(
            row.key(),
            OptionQuote {
                expiry: row.expiry,
                strike: row.strike,
                opt_type: row.opt_type,
                bid: row.bid,
                ask: row.ask,
                mid,
                iv,
                delta: row.delta,
                open_interest: row.open_interest,
                volume: row.volume,
                dte,
                tau,
                k,
            },
        );
    }
    diag.retained = quotes.len();
    debug_assert!(diag.is_consistent());

    Ok((
        ChainSnapshot { date: market.date, quotes },
        raw_chain,
        diag,
    ))
}

/// One fully ingested trading day.
#[derive(Debug, Clone)]
pub struct StoreDay {
    pub market: MarketDay,
    pub raw: RawChain,
    pub clean: ChainSnapshot,
    pub diagnostics: FilterDiagnostics,
}

/// Date-ordered container of ingested days; the single input handed to the
/// downstream pipeline regardless of whether the data came from disk or from
/// the synthetic generator.
#[derive(Debug, Clone, Default)]
pub struct ChainStore {
    days: Vec<StoreDay>,
}

impl ChainStore {
    /// Assemble a store from raw quote rows and per-date market data.
    ///
    /// Market dates define the calendar; duplicate market dates are an
    /// error, as is any quote dated outside the market calendar.
    pub fn build(quotes: Vec<RawQuote>, markets: Vec<MarketDay>) -> Result<ChainStore> {
        let mut markets = markets;
        markets.sort_by_key(|m| m.date);
        for w in markets.windows(2) {
            if w[0].date == w[1].date {
                return Err(Error::Data(format!("duplicate market date {}", w[0].date)));
            }
        }

        let mut by_date: BTreeMap<NaiveDate, Vec<RawQuote>> = BTreeMap::new();
        for q in quotes {
            by_date.entry(q.trade_date).or_default().push(q);
        }
        let market_dates: std::collections::BTreeSet<NaiveDate> =
            markets.iter().map(|m| m.date).collect();
        if let Some(orphan) = by_date.keys().find(|d| !market_dates.contains(d)) {
            return Err(Error::Data(format!(
                "quotes dated {orphan} have no matching market row"
            )));
        }

        let mut days = Vec::with_capacity(markets.len());
        for market in markets {
            let rows = by_date.remove(&market.date).unwrap_or_default();
            let (clean, raw, diagnostics) = clean_chain(&rows, &market)?;
            days.push(StoreDay { market, raw, clean, diagnostics });
        }
        Ok(ChainStore { days })
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    pub fn day(&self, idx: usize) -> &StoreDay {
        &self.days[idx]
    }

    pub fn days(&self) -> &[StoreDay] {
        &self.days
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.days.iter().map(|d| d.market.date).collect()
    }
}

//! Standardized option books formed fresh each day from the cleaned chain:
//! an at-the-money straddle, a 25-delta risk reversal, and a 25/10-delta
//! short put spread, each optionally delta-hedged with a spot leg.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::chain::{compute_forward, ChainSnapshot, MarketDay, OptType, OptionQuote};
use crate::pricing;

/// Target maturity (calendar days) when selecting the book expiry.
pub const EXPIRY_DTE_TARGET: i64 = 30;
/// The hedge leg is added only when |pre-hedge delta| exceeds this.
pub const DEFAULT_DELTA_TOLERANCE: f64 = 0.05;

/// The standardized book structures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BookType {
    AtmStraddle,
    RiskReversal25,
    ShortPutSpread25_10,
}

impl BookType {
    pub fn as_str(&self) -> &'static str {
        match self {
            BookType::AtmStraddle => "atm_straddle",
            BookType::RiskReversal25 => "risk_reversal_25",
            BookType::ShortPutSpread25_10 => "short_put_spread_25_10",
        }
    }

    pub fn parse(s: &str) -> Option<BookType> {
        match s {
            "atm_straddle" => Some(BookType::AtmStraddle),
            "risk_reversal_25" => Some(BookType::RiskReversal25),
            "short_put_spread_25_10" => Some(BookType::ShortPutSpread25_10),
            _ => None,
        }
    }

    pub fn all() -> [BookType; 3] {
        [BookType::AtmStraddle, BookType::RiskReversal25, BookType::ShortPutSpread25_10]
    }
}

/// What a leg references.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Instrument {
    Option { expiry: NaiveDate, opt_type: OptType, strike: f64 },
    Spot,
}

/// One position in a book. Weights are signed unit quantities for option
/// legs; the spot leg's weight is the hedge quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leg {
    pub instrument: Instrument,
    pub weight: f64,
    /// Mark at formation: option mid, or spot for the hedge leg.
    pub entry_mark: f64,
    /// Data-provided delta at formation (1 for the spot leg).
    pub entry_delta: f64,
}

impl Leg {
    pub fn is_option(&self) -> bool {
        matches!(self.instrument, Instrument::Option { .. })
    }
}

/// Summary descriptors recorded at formation; these feed the predictor set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BookDescriptors {
    pub net_premium: f64,
    /// Sum of |weight| * mid over option legs; the loss normalizer.
    pub gross_premium: f64,
    pub gross_vega: f64,
    pub gross_spot_notional: f64,
    pub pre_hedge_delta: f64,
    pub post_hedge_delta: f64,
    pub avg_dte: f64,
    pub avg_abs_k: f64,
}

pub const BOOK_FEATURE_NAMES: [&str; 8] = [
    "net_premium",
    "gross_premium",
    "gross_vega",
    "gross_spot_notional",
    "pre_hedge_delta",
    "post_hedge_delta",
    "avg_dte",
    "avg_abs_k",
];

impl BookDescriptors {
    pub fn feature_values(&self) -> Vec<Option<f64>> {
        vec![
            Some(self.net_premium),
            Some(self.gross_premium),
            Some(self.gross_vega),
            Some(self.gross_spot_notional),
            Some(self.pre_hedge_delta),
            Some(self.post_hedge_delta),
            Some(self.avg_dte),
            Some(self.avg_abs_k),
        ]
    }
}

/// A formed book: legs, entry value, and the premium normalizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Book {
    pub book_type: BookType,
    pub date: NaiveDate,
    pub expiry: NaiveDate,
    pub legs: Vec<Leg>,
    pub descriptors: BookDescriptors,
    /// Mark-to-market at formation, `sum(weight * entry_mark)`.
    pub value: f64,
    /// Gross entry premium of the option legs; strictly positive.
    pub normalization: f64,
}

/// Why a book could not be formed on a given day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormFailure {
    /// No cleaned quotes at all.
    EmptyChain,
    /// The straddle strike is missing its call or its put.
    MissingLeg(OptType),
    /// No quote with a usable delta for a wing selection.
    NoWingCandidates(OptType),
    /// Two legs resolved to the same contract.
    DegenerateLegs,
    /// A selected leg has no data delta, so the hedge cannot be sized.
    MissingDelta,
}

impl FormFailure {
    pub fn code(&self) -> &'static str {
        match self {
            FormFailure::EmptyChain => "empty_chain",
            FormFailure::MissingLeg(_) => "missing_leg",
            FormFailure::NoWingCandidates(_) => "no_wing_candidates",
            FormFailure::DegenerateLegs => "degenerate_legs",
            FormFailure::MissingDelta => "missing_delta",
        }
    }
}

impl std::fmt::Display for FormFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FormFailure::EmptyChain => write!(f, "no cleaned quotes"),
            FormFailure::MissingLeg(t) => write!(f, "straddle strike lacks its {} leg", t.as_str()),
            FormFailure::NoWingCandidates(t) => {
                write!(f, "no {} quotes with a delta at the selected expiry", t.as_str())
            }
            FormFailure::DegenerateLegs => write!(f, "legs resolved to the same contract"),
            FormFailure::MissingDelta => write!(f, "selected leg has no delta"),
        }
    }
}

/// Expiry with maturity nearest the 30-day target; ties take the shorter.
pub fn select_expiry(snapshot: &ChainSnapshot, date: NaiveDate) -> Option<NaiveDate> {
    snapshot.expiries().into_iter().min_by_key(|e| {
        let dte = (*e - date).num_days();
        ((dte - EXPIRY_DTE_TARGET).abs(), dte)
    })
}

/// Quote of `opt_type` at the selected expiry whose |delta| is nearest
/// `target`; ties take the smaller strike.
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

fn option_leg(quote: &OptionQuote, weight: f64) -> Result<Leg, FormFailure> {
    let delta = quote.delta.ok_or(FormFailure::MissingDelta)?;
    Ok(Leg {
        instrument: Instrument::Option {
            expiry: quote.expiry,
            opt_type: quote.opt_type,
            strike: quote.strike,
        },
        weight,
        entry_mark: quote.mid,
        entry_delta: delta,
    })
}

/// Form `book_type` on one day's cleaned chain.
///
/// Selection is fully deterministic: expiry nearest 30 days (ties shorter),
/// straddle strike nearest the forward (ties lower), wings nearest the
/// target |delta| (ties lower strike). A spot hedge leg is appended when the
/// option legs' net delta exceeds `delta_tolerance` in magnitude.
pub fn form_book(
    snapshot: &ChainSnapshot,
    market: &MarketDay,
    book_type: BookType,
    delta_tolerance: f64,
) -> Result<Book, FormFailure> {
    let expiry = select_expiry(snapshot, market.date).ok_or(FormFailure::EmptyChain)?;
    let quotes = snapshot.quotes_for_expiry(expiry);

    let mut legs: Vec<Leg> = Vec::with_capacity(3);
    match book_type {
        BookType::AtmStraddle => {
            let dte = (expiry - market.date).num_days();
            let tau = dte as f64 / 365.0;
            let fwd = compute_forward(market, tau)
                .expect("curve priced this expiry during cleaning");
            let mut strikes: Vec<f64> = quotes.iter().map(|q| q.strike).collect();
            strikes.sort_by(f64::total_cmp);
            strikes.dedup();
            let strike = strikes
                .into_iter()
                .min_by(|a, b| {
                    (a - fwd)
                        .abs()
                        .total_cmp(&(b - fwd).abs())
                        .then(a.total_cmp(b))
                })
                .ok_or(FormFailure::EmptyChain)?;
            let call = snapshot
                .lookup(expiry, OptType::Call, strike)
                .ok_or(FormFailure::MissingLeg(OptType::Call))?;
            let put = snapshot
                .lookup(expiry, OptType::Put, strike)
                .ok_or(FormFailure::MissingLeg(OptType::Put))?;
            legs.push(option_leg(call, 1.0)?);
            legs.push(option_leg(put, 1.0)?);
        }
        BookType::RiskReversal25 => {
            let call = wing_quote(&quotes, OptType::Call, 0.25)
                .ok_or(FormFailure::NoWingCandidates(OptType::Call))?;
            let put = wing_quote(&quotes, OptType::Put, 0.25)
                .ok_or(FormFailure::NoWingCandidates(OptType::Put))?;
            legs.push(option_leg(call, 1.0)?);
            legs.push(option_leg(put, -1.0)?);
        }
        BookType::ShortPutSpread25_10 => {
            let short = wing_quote(&quotes, OptType::Put, 0.25)
                .ok_or(FormFailure::NoWingCandidates(OptType::Put))?;
            let long = wing_quote(&quotes, OptType::Put, 0.10)
                .ok_or(FormFailure::NoWingCandidates(OptType::Put))?;
            if short.key() == long.key() {
                return Err(FormFailure::DegenerateLegs);
            }
            legs.push(option_leg(short, -1.0)?);
            legs.push(option_leg(long, 1.0)?);
        }
    }

    let pre_hedge_delta: f64 = legs.iter().map(|l| l.weight * l.entry_delta).sum();
    if pre_hedge_delta.abs() > delta_tolerance {
        legs.push(Leg {
            instrument: Instrument::Spot,
            weight: -pre_hedge_delta,
            entry_mark: market.spot,
            entry_delta: 1.0,
        });
    }
    let post_hedge_delta: f64 = legs.iter().map(|l| l.weight * l.entry_delta).sum();

    // Descriptors over option legs; the spot leg carries no premium or vega.
    let mut net_premium = 0.0;
    let mut gross_premium = 0.0;
    let mut gross_vega = 0.0;
    let mut dte_sum = 0.0;
    let mut abs_k_sum = 0.0;
    let mut n_opt = 0.0;
    for leg in &legs {
        if let Instrument::Option { expiry, opt_type, strike } = leg.instrument {
            let q = snapshot
                .lookup(expiry, opt_type, strike)
                .expect("leg was selected from this snapshot");
            net_premium += leg.weight * q.mid;
            gross_premium += leg.weight.abs() * q.mid;
            let rate = market
                .zero_rate(q.tau)
                .expect("curve priced this quote during cleaning");
            gross_vega += leg.weight.abs()
                * pricing::vega(market.spot, strike, q.tau, rate, market.div_yield, q.iv);
            dte_sum += q.dte as f64;
            abs_k_sum += q.k.abs();
            n_opt += 1.0;
        }
    }
    let gross_spot_notional = legs
        .iter()
        .find(|l| !l.is_option())
        .map(|l| l.weight.abs() * market.spot)
        .unwrap_or(0.0);

    let value = legs.iter().map(|l| l.weight * l.entry_mark).sum();
    let descriptors = BookDescriptors {
        net_premium,
        gross_premium,
        gross_vega,
        gross_spot_notional,
        pre_hedge_delta,
        post_hedge_delta,
        avg_dte: dte_sum / n_opt,
        avg_abs_k: abs_k_sum / n_opt,
    };

    debug_assert!(gross_premium > 0.0);
    Ok(Book {
        book_type,
        date: market.date,
        expiry,
        legs,
        descriptors,
        value,
        normalization: gross_premium,
    })
}

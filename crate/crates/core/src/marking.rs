//! Next-day marking of book legs through a fixed fallback hierarchy:
//! exact cleaned quote, exact pre-filter contract, strike interpolation
//! inside a true bracket, then nearest neighbor in (strike, maturity).
//! Each level carries a per-leg error bound built from empirically
//! estimated surface Lipschitz constants.

use serde::Serialize;

use crate::book::{Book, Instrument, Leg};
use crate::chain::{ChainSnapshot, OptType, StoreDay};

/// Scale (calendar days) that makes maturity distance comparable to
/// relative strike distance in the nearest-neighbor metric.
pub const NN_DTE_SCALE: f64 = 30.0;

/// Which levels of the hierarchy a run may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkPolicy {
    /// Exact levels only: cleaned quote or pre-filter contract.
    Strict,
    /// Full hierarchy including interpolation and nearest neighbor.
    Robust,
}

impl MarkPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            MarkPolicy::Strict => "strict",
            MarkPolicy::Robust => "robust",
        }
    }

    pub fn parse(s: &str) -> Option<MarkPolicy> {
        match s {
            "strict" => Some(MarkPolicy::Strict),
            "robust" => Some(MarkPolicy::Robust),
            _ => None,
        }
    }
}

/// How a leg's next-day value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkMode {
    ExactOption,
    ExactContract,
    Interpolated,
    NearestNeighbor,
    SpotDirect,
}

impl MarkMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            MarkMode::ExactOption => "exact_option",
            MarkMode::ExactContract => "exact_contract",
            MarkMode::Interpolated => "interpolated",
            MarkMode::NearestNeighbor => "nearest_neighbor",
            MarkMode::SpotDirect => "spot_direct",
        }
    }

    /// Exact modes re-observe the identical contract.
    pub fn is_exact(&self) -> bool {
        matches!(self, MarkMode::ExactOption | MarkMode::ExactContract | MarkMode::SpotDirect)
    }
}

/// One leg's next-day mark. `error_bound` is `Some(0)` for exact modes and
/// `None` when the Lipschitz constant needed for the bound is unavailable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkResult {
    pub mode: MarkMode,
    pub value: f64,
    pub error_bound: Option<f64>,
}

/// Largest observed quote-surface slopes on the next-day cleaned chain:
/// in strike within an expiry/type, and in maturity within a strike/type.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LipschitzEstimates {
    pub in_strike: Option<f64>,
    pub in_expiry: Option<f64>,
}

/// Estimate surface Lipschitz constants from adjacent cleaned quotes.
pub fn lipschitz_estimates(snapshot: &ChainSnapshot) -> LipschitzEstimates {
    let mut in_strike: Option<f64> = None;
    for expiry in snapshot.expiries() {
        for opt_type in [OptType::Call, OptType::Put] {
            let quotes = snapshot.quotes_for(expiry, opt_type);
            for w in quotes.windows(2) {
                let dk = w[1].strike - w[0].strike;
                if dk > 0.0 {
                    let slope = ((w[1].mid - w[0].mid) / dk).abs();
                    in_strike = Some(in_strike.map_or(slope, |m: f64| m.max(slope)));
                }
            }
        }
    }

    // Group quotes by (type, strike) across expiries.
    let mut by_strike: std::collections::BTreeMap<(u8, u64), Vec<(i64, f64)>> =
        std::collections::BTreeMap::new();
    for q in snapshot.iter() {
        let type_rank = match q.opt_type {
            OptType::Call => 0u8,
            OptType::Put => 1u8,
        };
        by_strike
            .entry((type_rank, q.strike.to_bits()))
            .or_default()
            .push((q.dte, q.mid));
    }
    let mut in_expiry: Option<f64> = None;
    for series in by_strike.values_mut() {
        series.sort_by_key(|p| p.0);
        for w in series.windows(2) {
            let ddte = (w[1].0 - w[0].0) as f64;
            if ddte > 0.0 {
                let slope = ((w[1].1 - w[0].1) / ddte).abs();
                in_expiry = Some(in_expiry.map_or(slope, |m: f64| m.max(slope)));
            }
        }
    }
    LipschitzEstimates { in_strike, in_expiry }
}

/// A leg whose value could not be established at the marking date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkFailure {
    pub instrument: Instrument,
    pub policy: MarkPolicy,
}

impl std::fmt::Display for MarkFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.instrument {
            Instrument::Option { expiry, opt_type, strike } => write!(
                f,
                "no usable {} mark for {} {} @ {}",
                self.policy.as_str(),
                opt_type.as_str(),
                strike,
                expiry
            ),
            Instrument::Spot => write!(f, "no spot available"),
        }
    }
}

/// Mark one leg on the following day's data.
pub fn mark_leg(
    leg: &Leg,
    next: &StoreDay,
    policy: MarkPolicy,
    lip: &LipschitzEstimates,
) -> Result<MarkResult, MarkFailure> {
    let (expiry, opt_type, strike) = match leg.instrument {
        Instrument::Spot => {
            return Ok(MarkResult {
                mode: MarkMode::SpotDirect,
                value: next.market.spot,
                error_bound: Some(0.0),
            })
        }
        Instrument::Option { expiry, opt_type, strike } => (expiry, opt_type, strike),
    };
    let fail = MarkFailure { instrument: leg.instrument, policy };

    // Level 1: identical contract in the cleaned next-day chain.
    if let Some(q) = next.clean.lookup(expiry, opt_type, strike) {
        return Ok(MarkResult { mode: MarkMode::ExactOption, value: q.mid, error_bound: Some(0.0) });
    }

    // Level 2: identical contract in the pre-filter chain with a sane quote.
    if let Some(r) = next.raw.lookup(&(expiry, opt_type, crate::chain::StrikeKey(strike))) {
        let mid = r.mid();
        if r.bid >= 0.0 && r.ask >= r.bid && mid > 0.0 {
            return Ok(MarkResult {
                mode: MarkMode::ExactContract,
                value: mid,
                error_bound: Some(0.0),
            });
        }
    }

    if policy == MarkPolicy::Strict {
        return Err(fail);
    }

    // Level 3: linear interpolation between a true strike bracket at the
    // same expiry and type. No extrapolation.
    let same_expiry = next.clean.quotes_for(expiry, opt_type);
    let lower = same_expiry
        .iter()
        .filter(|q| q.strike <= strike)
        .last()
        .copied();
    let upper = same_expiry.iter().find(|q| q.strike >= strike).copied();
    if let (Some(lo), Some(hi)) = (lower, upper) {
        if lo.strike < hi.strike {
            let theta = (hi.strike - strike) / (hi.strike - lo.strike);
            let value = theta * lo.mid + (1.0 - theta) * hi.mid;
            let gap = (strike - lo.strike).max(hi.strike - strike);
            let error_bound = lip.in_strike.map(|l| l * gap);
            return Ok(MarkResult { mode: MarkMode::Interpolated, value, error_bound });
        }
    }

    // Level 4: nearest neighbor of the same type across the cleaned chain.
    let target_dte = (expiry - next.market.date).num_days();
    let nearest = next
        .clean
        .iter()
        .filter(|q| q.opt_type == opt_type)
        .min_by(|a, b| {
            let da = (a.strike - strike).abs() / strike
                + (a.dte - target_dte).abs() as f64 / NN_DTE_SCALE;
            let db = (b.strike - strike).abs() / strike
                + (b.dte - target_dte).abs() as f64 / NN_DTE_SCALE;
            da.total_cmp(&db)
                .then(a.expiry.cmp(&b.expiry))
                .then(a.strike.total_cmp(&b.strike))
        });
    if let Some(q) = nearest {
        let dk = (q.strike - strike).abs();
        let ddte = (q.dte - target_dte).abs() as f64;
        let strike_term = if dk > 0.0 { lip.in_strike.map(|l| l * dk) } else { Some(0.0) };
        let expiry_term = if ddte > 0.0 { lip.in_expiry.map(|l| l * ddte) } else { Some(0.0) };
        let error_bound = match (strike_term, expiry_term) {
            (Some(a), Some(b)) => Some(a + b),
            _ => None,
        };
        return Ok(MarkResult { mode: MarkMode::NearestNeighbor, value: q.mid, error_bound });
    }

    Err(fail)
}

/// Counts of option-leg marks by hierarchy level.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ModeCounts {
    pub exact: usize,
    pub contract: usize,
    pub interpolated: usize,
    pub fallback: usize,
}

pub const MODE_COUNT_FEATURE_NAMES: [&str; 4] =
    ["marks_exact", "marks_contract", "marks_interpolated", "marks_fallback"];

impl ModeCounts {
    pub fn feature_values(&self) -> Vec<Option<f64>> {
        vec![
            Some(self.exact as f64),
            Some(self.contract as f64),
            Some(self.interpolated as f64),
            Some(self.fallback as f64),
        ]
    }

    pub fn total(&self) -> usize {
        self.exact + self.contract + self.interpolated + self.fallback
    }
}

/// A fully marked book one day after formation.
#[derive(Debug, Clone, PartialEq)]
pub struct BookMarking {
    /// Marking date (the day after formation).
    pub date: chrono::NaiveDate,
    /// Next-day book value `sum(weight * mark)`.
    pub value: f64,
    pub leg_marks: Vec<(Leg, MarkResult)>,
    pub mode_counts: ModeCounts,
    /// Worst-case |normalized loss error| implied by the per-leg bounds;
    /// missing when any non-exact leg lacks a Lipschitz constant.
    pub distortion_bound: Option<f64>,
    /// True when every option leg was marked at an exact level.
    pub strict_ok: bool,
}

/// Mark every leg of `book` on `next`, aggregating value and error bounds.
pub fn mark_book(book: &Book, next: &StoreDay, policy: MarkPolicy) -> Result<BookMarking, MarkFailure> {
    let lip = lipschitz_estimates(&next.clean);
    let mut leg_marks = Vec::with_capacity(book.legs.len());
    let mut value = 0.0;
    let mut counts = ModeCounts::default();
    let mut strict_ok = true;
    let mut weighted_bound = Some(0.0f64);
    for leg in &book.legs {
        let mark = mark_leg(leg, next, policy, &lip)?;
        value += leg.weight * mark.value;
        if leg.is_option() {
            match mark.mode {
                MarkMode::ExactOption => counts.exact += 1,
                MarkMode::ExactContract => counts.contract += 1,
                MarkMode::Interpolated => counts.interpolated += 1,
                MarkMode::NearestNeighbor => counts.fallback += 1,
                MarkMode::SpotDirect => unreachable!("option leg cannot mark as spot"),
            }
            if !mark.mode.is_exact() {
                strict_ok = false;
            }
            weighted_bound = match (weighted_bound, mark.error_bound) {
                (Some(acc), Some(eps)) => Some(acc + leg.weight.abs() * eps),
                _ => None,
            };
        }
        leg_marks.push((*leg, mark));
    }
    Ok(BookMarking {
        date: next.market.date,
        value,
        leg_marks,
        mode_counts: counts,
        distortion_bound: weighted_bound.map(|b| b / book.normalization),
        strict_ok,
    })
}

//! Supervised panel assembly: one row per day whose book was formed and
//! marked the following day, pairing the normalized next-day loss with a
//! strictly causal predictor vector.

use chrono::NaiveDate;

use crate::book::{Book, BOOK_FEATURE_NAMES};
use crate::marking::{BookMarking, ModeCounts};
use crate::state::{StateVector, STATE_FEATURE_NAMES};
use crate::stats;

/// Trailing window for the lagged mean of realized losses.
pub const Y_MEAN_WINDOW: usize = 21;
/// Trailing window and level for the lagged upper quantile of losses.
pub const Y_QUANTILE_WINDOW: usize = 63;
pub const Y_QUANTILE_LEVEL: f64 = 0.90;

/// Normalized next-day loss of a marked book: positive when the book loses.
pub fn compute_loss(book: &Book, marking: &BookMarking) -> f64 {
    (book.value - marking.value) / book.normalization
}

/// Everything known about one formation date, handed to [`build_panel`].
#[derive(Debug, Clone)]
pub struct PanelEntry {
    pub state: StateVector,
    pub book: Book,
    pub marking: BookMarking,
}

/// One supervised observation.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    /// Formation date; the target is realized the following day.
    pub date: NaiveDate,
    /// Normalized loss realized at the marking date.
    pub y_next: f64,
    /// Predictors in [`feature_names`] order; `None` is missing.
    pub x: Vec<Option<f64>>,
    /// Worst-case |loss error| from the marking bounds, if available.
    pub distortion_bound: Option<f64>,
    /// Whether every option leg marked at an exact level.
    pub strict_ok: bool,
    /// How this row's own legs marked (resolved at the marking date; it
    /// feeds records and the *next* row's predictors, never this row's).
    pub mode_counts: ModeCounts,
}

/// Predictor column names, fixed across the crate. Mode-count predictors
/// describe the most recent *resolved* marking (the previous row's), never
/// the row's own future marking.
pub fn feature_names() -> Vec<&'static str> {
    let mut names: Vec<&'static str> = Vec::with_capacity(36);
    names.extend(STATE_FEATURE_NAMES);
    names.extend(BOOK_FEATURE_NAMES);
    names.extend([
        "prev_marks_exact",
        "prev_marks_contract",
        "prev_marks_interpolated",
        "prev_marks_fallback",
    ]);
    names.extend(["y_lag_1", "y_mean_21", "y_q90_63"]);
    names
}

/// Assemble the panel from per-date entries, in date order regardless of
/// input order. Every predictor uses information dated at or before the
/// row's formation date: lagged loss statistics come from earlier rows
/// (whose losses realized no later than this row's formation date), and
/// mode counts are taken from the previous row's resolved marking.
pub fn build_panel(mut entries: Vec<PanelEntry>) -> Vec<PanelRow> {
    entries.sort_by_key(|e| e.book.date);
    let mut rows: Vec<PanelRow> = Vec::with_capacity(entries.len());
    let mut past_y: Vec<f64> = Vec::with_capacity(entries.len());
    let mut prev_counts: Option<ModeCounts> = None;

    for entry in &entries {
        debug_assert!(entry.marking.date > entry.book.date);
        debug_assert_eq!(entry.state.date, entry.book.date);
        let y = compute_loss(&entry.book, &entry.marking);

        let mut x: Vec<Option<f64>> = Vec::with_capacity(36);
        x.extend(entry.state.feature_values());
        x.extend(entry.book.descriptors.feature_values());
        match &prev_counts {
            Some(c) => x.extend(c.feature_values()),
            None => x.extend([None, None, None, None]),
        }
        x.push(past_y.last().copied());
        let mean_tail = &past_y[past_y.len().saturating_sub(Y_MEAN_WINDOW)..];
        x.push(stats::mean(mean_tail));
        let q_tail = &past_y[past_y.len().saturating_sub(Y_QUANTILE_WINDOW)..];
        x.push(if q_tail.is_empty() {
            None
        } else {
            Some(stats::upper_quantile(q_tail, Y_QUANTILE_LEVEL))
        });

        rows.push(PanelRow {
            date: entry.book.date,
            y_next: y,
            x,
            distortion_bound: entry.marking.distortion_bound,
            strict_ok: entry.marking.strict_ok,
            mode_counts: entry.marking.mode_counts,
        });
        past_y.push(y);
        prev_counts = Some(entry.marking.mode_counts);
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::book::{BookDescriptors, BookType, Instrument, Leg};
    use crate::chain::OptType;
    use crate::marking::{MarkMode, MarkResult};
    use approx::assert_relative_eq;
    use chrono::NaiveDate;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn dummy_state(date: NaiveDate) -> StateVector {
        StateVector {
            date,
            atm_iv: Some(0.2),
            skew_25d: Some(0.01),
            term_slope: Some(0.0),
            smile_curvature: None,
            avg_open_interest: Some(100.0),
            avg_volume: Some(10.0),
            avg_rel_spread: Some(0.1),
            spot_ret_1d: Some(0.0),
            abs_ret_1d: Some(0.0),
            realized_vol_21d: None,
            drawdown: Some(0.0),
            downside_semivar_21d: None,
            vix: Some(18.0),
            vxv: Some(19.0),
            vix_vxv_spread: Some(-1.0),
            atm_iv_chg_1d: None,
            atm_iv_chg_5d: None,
            skew_25d_chg_1d: None,
            skew_25d_chg_5d: None,
            vix_chg_1d: None,
            vix_chg_5d: None,
        }
    }

    fn dummy_book(date: NaiveDate, value: f64, normalization: f64) -> Book {
        let leg = Leg {
            instrument: Instrument::Option {
                expiry: date + chrono::Days::new(30),
                opt_type: OptType::Call,
                strike: 100.0,
            },
            weight: 1.0,
            entry_mark: value,
            entry_delta: 0.5,
        };
        Book {
            book_type: BookType::AtmStraddle,
            date,
            expiry: date + chrono::Days::new(30),
            legs: vec![leg],
            descriptors: BookDescriptors {
                net_premium: value,
                gross_premium: normalization,
                gross_vega: 20.0,
                gross_spot_notional: 0.0,
                pre_hedge_delta: 0.0,
                post_hedge_delta: 0.0,
                avg_dte: 30.0,
                avg_abs_k: 0.01,
            },
            value,
            normalization,
        }
    }

    fn dummy_marking(date: NaiveDate, value: f64) -> BookMarking {
        BookMarking {
            date,
            value,
            leg_marks: vec![(
                dummy_book(date - chrono::Days::new(1), value, 1.0).legs[0],
                MarkResult { mode: MarkMode::ExactOption, value, error_bound: Some(0.0) },
            )],
            mode_counts: ModeCounts { exact: 1, ..ModeCounts::default() },
            distortion_bound: Some(0.0),
            strict_ok: true,
        }
    }

    fn entry(date: &str, v_t: f64, v_next: f64, norm: f64) -> PanelEntry {
        let date = d(date);
        PanelEntry {
            state: dummy_state(date),
            book: dummy_book(date, v_t, norm),
            marking: dummy_marking(date + chrono::Days::new(1), v_next),
        }
    }

    #[test]
    fn loss_is_normalized_value_decline() {
        let e = entry("2020-03-02", 100.0, 90.0, 50.0);
        assert_relative_eq!(compute_loss(&e.book, &e.marking), 0.2, epsilon = 1e-12);
        let gain = entry("2020-03-02", 100.0, 110.0, 50.0);
        assert_relative_eq!(compute_loss(&gain.book, &gain.marking), -0.2, epsilon = 1e-12);
    }

    #[test]
    fn first_row_has_missing_lag_block() {
        let rows = build_panel(vec![entry("2020-03-02", 100.0, 90.0, 50.0)]);
        assert_eq!(rows.len(), 1);
        let names = feature_names();
        let x = &rows[0].x;
        assert_eq!(x.len(), names.len());
        let idx = |n: &str| names.iter().position(|m| *m == n).unwrap();
        assert_eq!(x[idx("y_lag_1")], None);
        assert_eq!(x[idx("y_mean_21")], None);
        assert_eq!(x[idx("y_q90_63")], None);
        assert_eq!(x[idx("prev_marks_exact")], None);
    }

    #[test]
    fn lag_block_uses_prior_rows_only() {
        let entries = vec![
            entry("2020-03-02", 100.0, 90.0, 100.0),  // y = 0.10
            entry("2020-03-03", 100.0, 80.0, 100.0),  // y = 0.20
            entry("2020-03-04", 100.0, 70.0, 100.0),  // y = 0.30
            entry("2020-03-05", 100.0, 100.0, 100.0), // y = 0.00
        ];
        let rows = build_panel(entries);
        let names = feature_names();
        let idx = |n: &str| names.iter().position(|m| *m == n).unwrap();
        let x3 = &rows[3].x;
        assert_relative_eq!(x3[idx("y_lag_1")].unwrap(), 0.30, epsilon = 1e-12);
        assert_relative_eq!(x3[idx("y_mean_21")].unwrap(), 0.20, epsilon = 1e-12);
        // Upper 0.9-quantile of {0.1, 0.2, 0.3}: k = 3 of n = 3.
        assert_relative_eq!(x3[idx("y_q90_63")].unwrap(), 0.30, epsilon = 1e-12);
        // Mode counts come from the previous row's marking.
        assert_eq!(x3[idx("prev_marks_exact")], Some(1.0));
        // The row's own y never appears in its predictors: change y of the
        // last row and earlier rows are untouched.
        let mut shorter = build_panel(vec![
            entry("2020-03-02", 100.0, 90.0, 100.0),
            entry("2020-03-03", 100.0, 80.0, 100.0),
            entry("2020-03-04", 100.0, 70.0, 100.0),
        ]);
        assert_eq!(shorter.pop().unwrap().x, rows[2].x);
    }

    #[test]
    fn panel_order_is_by_date_regardless_of_input_order() {
        let a = vec![
            entry("2020-03-02", 100.0, 90.0, 100.0),
            entry("2020-03-03", 100.0, 80.0, 100.0),
            entry("2020-03-04", 100.0, 70.0, 100.0),
        ];
        let mut b = a.clone();
        b.reverse();
        assert_eq!(build_panel(a), build_panel(b));
    }

    #[test]
    fn feature_vector_matches_schema_length() {
        let rows = build_panel(vec![entry("2020-03-02", 100.0, 90.0, 50.0)]);
        assert_eq!(rows[0].x.len(), feature_names().len());
        assert_eq!(feature_names().len(), 36);
    }
}

//! Cross-module checks on generated markets: marking accuracy against the
//! generator's own truth, policy containment, panel causality under
//! truncation, error-bound coverage, and whole-run determinism.

use approx::assert_relative_eq;

use optvar::backtest::{run_backtest, RunSettings};
use optvar::book::{form_book, Book, BookType, Instrument};
use optvar::chain::StrikeKey;
use optvar::forecast::{LearnerKind, LearnerParams};
use optvar::marking::{mark_book, MarkPolicy};
use optvar::synth::{generate, SynthConfig, SynthDay};

fn fast_settings(policy: MarkPolicy) -> RunSettings {
    RunSettings {
        policy,
        learner: LearnerParams { kind: LearnerKind::Linear, ..LearnerParams::default() },
        ..RunSettings::default()
    }
}

/// Next-day book value priced off the generator's recorded true mids.
fn true_value(book: &Book, day: &SynthDay, next_spot: f64) -> Option<f64> {
    let mut value = 0.0;
    for leg in &book.legs {
        match leg.instrument {
            Instrument::Option { expiry, opt_type, strike } => {
                let mid = day.next_true_mids.get(&(expiry, opt_type, StrikeKey(strike)))?;
                value += leg.weight * mid;
            }
            Instrument::Spot => value += leg.weight * next_spot,
        }
    }
    Some(value)
}

#[test]
fn strict_marks_reproduce_the_generators_truth() {
    let market = generate(&SynthConfig {
        n_days: 90,
        missing_prob: 0.0,
        seed: 31,
        ..SynthConfig::default()
    });
    let days = market.days.clone();
    let store = market.into_store().unwrap();

    let mut checked = 0;
    for idx in 0..store.len() - 1 {
        let day = store.day(idx);
        let next = store.day(idx + 1);
        for book_type in BookType::all() {
            let Ok(book) = form_book(&day.clean, &day.market, book_type, 0.05) else {
                continue;
            };
            let Ok(marking) = mark_book(&book, next, MarkPolicy::Strict) else {
                continue;
            };
            let truth = true_value(&book, &days[idx], days[idx + 1].market.spot).unwrap();
            assert_relative_eq!(marking.value, truth, epsilon = 1e-9, max_relative = 1e-9);
            assert!(marking.strict_ok);
            assert_eq!(marking.distortion_bound, Some(0.0));
            checked += 1;
        }
    }
    assert!(checked > 150, "only {checked} strict marks checked");
}

#[test]
fn robust_panel_contains_the_strict_panel_with_identical_targets() {
    let market = generate(&SynthConfig {
        n_days: 150,
        missing_prob: 0.20,
        seed: 32,
        ..SynthConfig::default()
    });
    let store = market.into_store().unwrap();

    let strict = run_backtest(&store, BookType::AtmStraddle, &fast_settings(MarkPolicy::Strict))
        .unwrap();
    let robust = run_backtest(&store, BookType::AtmStraddle, &fast_settings(MarkPolicy::Robust))
        .unwrap();

    assert!(strict.panel.len() < robust.panel.len(), "deletion should cost strict dates");
    for row in &strict.panel {
        let twin = robust
            .panel
            .iter()
            .find(|r| r.date == row.date)
            .unwrap_or_else(|| panic!("robust panel lost strict date {}", row.date));
        assert_eq!(row.y_next.to_bits(), twin.y_next.to_bits(), "target diverged on {}", row.date);
        assert!(twin.strict_ok, "robust row on {} should resolve exact marks", row.date);
    }
}

#[test]
fn panel_rows_are_immune_to_future_truncation() {
    let long = generate(&SynthConfig { n_days: 130, seed: 33, ..SynthConfig::default() });
    let short = generate(&SynthConfig { n_days: 85, seed: 33, ..SynthConfig::default() });
    let store_long = long.into_store().unwrap();
    let store_short = short.into_store().unwrap();

    let settings = fast_settings(MarkPolicy::Robust);
    let full = run_backtest(&store_long, BookType::AtmStraddle, &settings).unwrap();
    let cut = run_backtest(&store_short, BookType::AtmStraddle, &settings).unwrap();

    assert!(!cut.panel.is_empty());
    for row in &cut.panel {
        let twin = full
            .panel
            .iter()
            .find(|r| r.date == row.date)
            .unwrap_or_else(|| panic!("full panel lost date {}", row.date));
        assert_eq!(row, twin, "row on {} depends on days after it", row.date);
    }
}

#[test]
fn marking_error_bounds_cover_the_realized_error() {
    // Heavy deletion forces interpolated and fallback marks; wherever the
    // engine still quotes a bound, the realized loss error must sit inside
    // it.
    let market = generate(&SynthConfig {
        n_days: 140,
        missing_prob: 0.25,
        seed: 34,
        ..SynthConfig::default()
    });
    let days = market.days.clone();
    let store = market.into_store().unwrap();

    let mut bounded_rows = 0;
    let mut non_exact_rows = 0;
    for idx in 0..store.len() - 1 {
        let day = store.day(idx);
        let next = store.day(idx + 1);
        for book_type in BookType::all() {
            let Ok(book) = form_book(&day.clean, &day.market, book_type, 0.05) else {
                continue;
            };
            let Ok(marking) = mark_book(&book, next, MarkPolicy::Robust) else {
                continue;
            };
            let Some(truth) = true_value(&book, &days[idx], days[idx + 1].market.spot) else {
                continue;
            };
            if !marking.strict_ok {
                non_exact_rows += 1;
            }
            let Some(bound) = marking.distortion_bound else {
                continue;
            };
            bounded_rows += 1;
            let loss_marked = (book.value - marking.value) / book.normalization;
            let loss_true = (book.value - truth) / book.normalization;
            let err = (loss_marked - loss_true).abs();
            assert!(
                err <= bound + 1e-9,
                "day {idx} {book_type:?}: error {err} above bound {bound}"
            );
        }
    }
    assert!(non_exact_rows > 30, "only {non_exact_rows} degraded marks; test has no bite");
    assert!(bounded_rows > 100, "only {bounded_rows} bounded marks checked");
}

#[test]
fn whole_run_is_deterministic_from_the_seed() {
    let cfg = SynthConfig { n_days: 150, seed: 35, ..SynthConfig::default() };
    let store_a = generate(&cfg).into_store().unwrap();
    let store_b = generate(&cfg).into_store().unwrap();
    let settings = fast_settings(MarkPolicy::Robust);
    let a = run_backtest(&store_a, BookType::ShortPutSpread25_10, &settings).unwrap();
    let b = run_backtest(&store_b, BookType::ShortPutSpread25_10, &settings).unwrap();
    assert_eq!(a.panel, b.panel);
    assert_eq!(a.records, b.records);
    assert_eq!(a.skips, b.skips);
}

#[test]
fn every_formation_day_is_a_panel_row_or_a_counted_skip() {
    let market = generate(&SynthConfig {
        n_days: 120,
        missing_prob: 0.15,
        seed: 36,
        ..SynthConfig::default()
    });
    let store = market.into_store().unwrap();
    for book_type in BookType::all() {
        let run = run_backtest(&store, book_type, &fast_settings(MarkPolicy::Strict)).unwrap();
        let skipped: usize = run.skips.values().sum();
        assert_eq!(
            run.panel.len() + skipped,
            store.len() - 1,
            "{book_type:?}: rows {} + skips {skipped} should cover every formation day",
            run.panel.len()
        );
    }
}

//! Next-day tail-risk engine for standardized option books.
//!
//! The pipeline runs in stages, each a module of this crate:
//!
//! 1. [`chain`] — ingest raw option quotes, clean them with staged filters,
//!    and index them per trading day alongside market state and zero rates.
//! 2. [`state`] — daily market features: surface levels, chain quality,
//!    spot-path statistics, index proxies, and their changes.
//! 3. [`book`] — deterministic formation of standardized books (ATM
//!    straddle, 25-delta risk reversal, 25/10-delta short put spread) with
//!    an optional spot hedge, plus structure descriptors.
//! 4. [`marking`] — next-day revaluation through a four-level hierarchy
//!    (cleaned quote, raw quote, in-strike interpolation, nearest
//!    neighbor), each inexact level carrying a worst-case error bound.
//! 5. [`panel`] — supervised rows: realized normalized loss against
//!    predictors known at formation time.
//! 6. [`forecast`] — rolling upper-quantile learners under pinball loss
//!    (gradient-boosted trees or a linear subgradient model).
//! 7. [`conformal`] — sequential recalibration with decay-weighted residual
//!    quantiles and an explicit fallback ladder.
//! 8. [`backtest`] — the day-by-day driver with exceedance metrics, rolling
//!    windows, crisis slices, and marking-policy ablations.
//! 9. [`synth`] — a seeded regime-switching market generator whose every
//!    quote has a closed form, for end-to-end validation.
//! 10. [`config`] / [`io`] — versioned run configuration and deterministic
//!     file formats.

pub mod backtest;
pub mod book;
pub mod chain;
pub mod config;
pub mod conformal;
pub mod error;
pub mod forecast;
pub mod io;
pub mod marking;
pub mod panel;
pub mod pricing;
pub mod state;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};

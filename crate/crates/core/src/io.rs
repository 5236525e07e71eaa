//! File formats: CSV readers for the three input feeds and deterministic
//! writers for run outputs.
//!
//! Floats are written with the shortest representation that parses back to
//! the same value, and map-like output uses ordered keys, so identical runs
//! produce identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::backtest::{rolling_exceedance, AblationRow, ForecastRecord, Method};
use crate::chain::{MarketDay, OptType, RawQuote, ZeroCurve};
use crate::error::{Error, Result};
use crate::panel::{feature_names, PanelRow};

#[derive(Debug, Deserialize)]
struct ChainRow {
    trade_date: NaiveDate,
    expiry: NaiveDate,
    strike: f64,
    #[serde(rename = "type")]
    opt_type: String,
    bid: f64,
    ask: f64,
    iv: Option<f64>,
    delta: Option<f64>,
    open_interest: u64,
    volume: u64,
}

/// Read an option-chain CSV
/// (`trade_date,expiry,strike,type,bid,ask,iv,delta,open_interest,volume`).
pub fn read_chain_csv(path: &Path) -> Result<Vec<RawQuote>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<ChainRow>().enumerate() {
        let row = row?;
        let opt_type = OptType::parse(&row.opt_type).ok_or_else(|| {
            Error::Data(format!(
                "{}: row {}: unknown option type '{}'",
                path.display(),
                i + 2,
                row.opt_type
            ))
        })?;
        out.push(RawQuote {
            trade_date: row.trade_date,
            expiry: row.expiry,
            strike: row.strike,
            opt_type,
            bid: row.bid,
            ask: row.ask,
            iv: row.iv,
            delta: row.delta,
            open_interest: row.open_interest,
            volume: row.volume,
        });
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct MarketRow {
    date: NaiveDate,
    spot: f64,
    div_yield: f64,
    vix: Option<f64>,
    vxv: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct RateRow {
    date: NaiveDate,
    tenor_days: u32,
    rate: f64,
}

/// Read the market CSV (`date,spot,div_yield,vix,vxv`) and the zero-rate
/// CSV (`date,tenor_days,rate`), joining them into per-date market states.
/// Every market date must have at least one rate row.
pub fn read_market_inputs(market_path: &Path, rates_path: &Path) -> Result<Vec<MarketDay>> {
    let mut curves: std::collections::BTreeMap<NaiveDate, Vec<(u32, f64)>> =
        std::collections::BTreeMap::new();
    let mut rdr = csv::Reader::from_path(rates_path)?;
    for row in rdr.deserialize::<RateRow>() {
        let row = row?;
        curves.entry(row.date).or_default().push((row.tenor_days, row.rate));
    }

    let mut rdr = csv::Reader::from_path(market_path)?;
    let mut out = Vec::new();
    for row in rdr.deserialize::<MarketRow>() {
        let row = row?;
        let points = curves.remove(&row.date).ok_or_else(|| {
            Error::Data(format!(
                "{}: no zero-rate rows for market date {}",
                rates_path.display(),
                row.date
            ))
        })?;
        out.push(MarketDay {
            date: row.date,
            spot: row.spot,
            curve: ZeroCurve::new(points),
            div_yield: row.div_yield,
            vix: row.vix,
            vxv: row.vxv,
        });
    }
    Ok(out)
}

/// Write quote rows in the layout `read_chain_csv` expects.
pub fn write_chain_input_csv(path: &Path, quotes: &[RawQuote]) -> Result<()> {
    let mut w = writer_for(path)?;
    w.write_record([
        "trade_date",
        "expiry",
        "strike",
        "type",
        "bid",
        "ask",
        "iv",
        "delta",
        "open_interest",
        "volume",
    ])?;
    for q in quotes {
        w.write_record([
            q.trade_date.to_string(),
            q.expiry.to_string(),
            fmt_f64(q.strike),
            q.opt_type.as_str().to_string(),
            fmt_f64(q.bid),
            fmt_f64(q.ask),
            fmt_opt(q.iv),
            fmt_opt(q.delta),
            q.open_interest.to_string(),
            q.volume.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write market rows in the layout `read_market_inputs` expects.
pub fn write_market_input_csv(path: &Path, days: &[MarketDay]) -> Result<()> {
    let mut w = writer_for(path)?;
    w.write_record(["date", "spot", "div_yield", "vix", "vxv"])?;
    for d in days {
        w.write_record([
            d.date.to_string(),
            fmt_f64(d.spot),
            fmt_f64(d.div_yield),
            fmt_opt(d.vix),
            fmt_opt(d.vxv),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write each day's zero-curve knots in the layout `read_market_inputs`
/// expects.
pub fn write_rates_input_csv(path: &Path, days: &[MarketDay]) -> Result<()> {
    let mut w = writer_for(path)?;
    w.write_record(["date", "tenor_days", "rate"])?;
    for d in days {
        for (tenor, rate) in d.curve.points() {
            w.write_record([d.date.to_string(), tenor.to_string(), fmt_f64(*rate)])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn writer_for(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path)?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

/// One row per prediction date with every threshold and its provenance.
pub fn write_records_csv(path: &Path, records: &[ForecastRecord]) -> Result<()> {
    let mut w = writer_for(path)?;
    w.write_record([
        "date",
        "y_next",
        "q_base",
        "q_hist",
        "q_ref",
        "buffer",
        "regime",
        "n_recent",
        "n_total",
        "q_core",
        "q_rep",
        "marks_exact",
        "marks_contract",
        "marks_interpolated",
        "marks_fallback",
        "strict_ok",
        "distortion_bound",
    ])?;
    for r in records {
        w.write_record([
            r.date.to_string(),
            fmt_f64(r.y_next),
            fmt_f64(r.q_base),
            fmt_f64(r.q_hist),
            fmt_f64(r.q_ref),
            fmt_f64(r.buffer),
            r.regime.as_str().to_string(),
            r.n_recent.to_string(),
            r.n_total.to_string(),
            fmt_f64(r.q_core),
            fmt_f64(r.q_rep),
            r.mode_counts.exact.to_string(),
            r.mode_counts.contract.to_string(),
            r.mode_counts.interpolated.to_string(),
            r.mode_counts.fallback.to_string(),
            r.strict_ok.to_string(),
            fmt_opt(r.distortion_bound),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Rolling exceedance rates over full windows for the floored base and the
/// recalibrated thresholds, stamped with the window-end date.
pub fn write_rolling_csv(path: &Path, records: &[ForecastRecord], window: usize) -> Result<()> {
    let base_hits: Vec<bool> =
        records.iter().map(|r| crate::backtest::exceeds(r, Method::BaseFloored)).collect();
    let conf_hits: Vec<bool> =
        records.iter().map(|r| crate::backtest::exceeds(r, Method::Conformal)).collect();
    let base = rolling_exceedance(&base_hits, window);
    let conf = rolling_exceedance(&conf_hits, window);
    let mut w = writer_for(path)?;
    w.write_record(["date", "roll_exc_base_floored", "roll_exc_conformal"])?;
    for (i, (b, c)) in base.iter().zip(&conf).enumerate() {
        w.write_record([
            records[window - 1 + i].date.to_string(),
            fmt_f64(*b),
            fmt_f64(*c),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ablation_csv(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let mut w = writer_for(path)?;
    w.write_record([
        "setting",
        "method",
        "n",
        "exceedance_rate",
        "mean_threshold",
        "crisis_n",
        "crisis_exceedance",
    ])?;
    for r in rows {
        w.write_record([
            r.setting.clone(),
            r.method.clone(),
            r.n.to_string(),
            fmt_opt(r.exceedance_rate),
            fmt_opt(r.mean_threshold),
            r.crisis_n.to_string(),
            fmt_opt(r.crisis_exceedance),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The supervised panel with its full predictor block, one column per
/// feature name.
pub fn write_panel_csv(path: &Path, panel: &[PanelRow]) -> Result<()> {
    let mut w = writer_for(path)?;
    let mut header = vec!["date", "y_next", "strict_ok", "distortion_bound"];
    header.extend(feature_names());
    w.write_record(&header)?;
    for row in panel {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        rec.push(row.date.to_string());
        rec.push(fmt_f64(row.y_next));
        rec.push(row.strict_ok.to_string());
        rec.push(fmt_opt(row.distortion_bound));
        rec.extend(row.x.iter().map(|v| fmt_opt(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = serde_json::to_string_pretty(value)?;
    out.push('\n');
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(out.as_bytes())?;
    f.flush()?;
    Ok(())
}

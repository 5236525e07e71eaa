//! Command-line front end: ingestion checks, synthetic-market emission,
//! backtests, robustness grids, and report printing, all driven by one
//! versioned JSON configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use optvar::backtest::{assemble_report, run_backtest, BookReport};
use optvar::chain::{ChainStore, FilterDiagnostics};
use optvar::config::{DataSource, RunConfig};
use optvar::io::{
    read_chain_csv, read_market_inputs, write_ablation_csv, write_chain_input_csv, write_json,
    write_market_input_csv, write_panel_csv, write_rates_input_csv, write_records_csv,
    write_rolling_csv,
};
use optvar::marking::MarkPolicy;
use optvar::synth::generate;
use optvar::{Error, Result};

#[derive(Parser)]
#[command(
    name = "optvar",
    version,
    about = "Tail-risk engine for standardized option books"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and clean the three input CSVs, then write a cleaning summary.
    Ingest(IngestArgs),
    /// Generate the configured synthetic market and write it as input CSVs.
    Synth(RunArgs),
    /// Run the full pipeline for every configured book.
    Backtest(RunArgs),
    /// One backtest per axis combination plus a combined summary table.
    Grid(GridArgs),
    /// Validate and pretty-print a previously written report.
    Report(ReportArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Option-chain CSV (trade_date,expiry,strike,type,bid,ask,iv,delta,open_interest,volume).
    #[arg(long)]
    chain: PathBuf,
    /// Market CSV (date,spot,div_yield,vix,vxv).
    #[arg(long)]
    market: PathBuf,
    /// Zero-rate CSV (date,tenor_days,rate).
    #[arg(long)]
    rates: PathBuf,
    /// Output directory for the cleaning summary.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the synthetic-market seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated sweep axes: learner, marking, floor, lambda, window.
    #[arg(long, default_value = "lambda,window")]
    axes: String,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding a report.json written by `backtest`.
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Ingest(args) => cmd_ingest(&args),
        Cmd::Synth(args) => cmd_synth(&load_config(&args)?, &args.out),
        Cmd::Backtest(args) => cmd_backtest(&load_config(&args)?, &args.out),
        Cmd::Grid(args) => cmd_grid(&load_config(&args.run)?, &args.run.out, &args.axes),
        Cmd::Report(args) => cmd_report(&args.out),
    }
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.synth.seed = seed;
    }
    Ok(cfg)
}

/// Materialize the configured data source as an ingested store.
fn load_store(cfg: &RunConfig) -> Result<ChainStore> {
    match &cfg.data {
        DataSource::Synth => generate(&cfg.synth).into_store(),
        DataSource::Csv { chain, market, rates } => {
            for path in [chain, market, rates] {
                if !path.exists() {
                    return Err(Error::Data(format!(
                        "input file {} does not exist",
                        path.display()
                    )));
                }
            }
            let quotes = read_chain_csv(chain)?;
            let markets = read_market_inputs(market, rates)?;
            ChainStore::build(quotes, markets)
        }
    }
}

// ---------------------------------------------------------------- ingest

#[derive(Debug, Serialize, Deserialize)]
struct DaySummary {
    date: NaiveDate,
    diagnostics: FilterDiagnostics,
}

#[derive(Debug, Serialize, Deserialize)]
struct IngestSummary {
    n_days: usize,
    n_quotes_in: usize,
    n_quotes_kept: usize,
    totals: FilterDiagnostics,
    days: Vec<DaySummary>,
}

fn add_diagnostics(total: &mut FilterDiagnostics, d: &FilterDiagnostics) {
    total.raw_rows += d.raw_rows;
    total.duplicate += d.duplicate;
    total.dte_window += d.dte_window;
    total.moneyness_window += d.moneyness_window;
    total.nonpositive_bid += d.nonpositive_bid;
    total.crossed_quote += d.crossed_quote;
    total.small_mid += d.small_mid;
    total.missing_iv += d.missing_iv;
    total.wide_spread += d.wide_spread;
    total.inactive += d.inactive;
    total.retained += d.retained;
}

fn cmd_ingest(args: &IngestArgs) -> Result<()> {
    for path in [&args.chain, &args.market, &args.rates] {
        if !path.exists() {
            return Err(Error::Data(format!("input file {} does not exist", path.display())));
        }
    }
    // A completely empty chain file is a valid zero-row feed.
    let quotes = if std::fs::metadata(&args.chain)?.len() == 0 {
        Vec::new()
    } else {
        read_chain_csv(&args.chain)?
    };
    if quotes.is_empty() {
        eprintln!("warning: {} contains no quote rows", args.chain.display());
    }
    let n_quotes_in = quotes.len();
    let markets = read_market_inputs(&args.market, &args.rates)?;
    let store = ChainStore::build(quotes, markets)?;

    let mut totals = FilterDiagnostics::default();
    let mut days = Vec::with_capacity(store.len());
    for day in store.days() {
        add_diagnostics(&mut totals, &day.diagnostics);
        days.push(DaySummary {
            date: day.market.date,
            diagnostics: day.diagnostics.clone(),
        });
    }
    let summary = IngestSummary {
        n_days: store.len(),
        n_quotes_in,
        n_quotes_kept: totals.retained,
        totals,
        days,
    };
    std::fs::create_dir_all(&args.out)?;
    write_json(&args.out.join("ingest.json"), &summary)?;
    println!(
        "ingested {} days, kept {} of {} quotes -> {}",
        summary.n_days,
        summary.n_quotes_kept,
        summary.n_quotes_in,
        args.out.join("ingest.json").display()
    );
    Ok(())
}

// ----------------------------------------------------------------- synth

#[derive(Debug, Serialize, Deserialize)]
struct SynthSummary {
    seed: u64,
    n_days: usize,
    n_quotes: usize,
    regime_days: BTreeMap<String, usize>,
}

fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let market = generate(&cfg.synth);
    let quotes = market.all_quotes();
    let days = market.markets();
    let mut regime_days: BTreeMap<String, usize> = BTreeMap::new();
    for day in &market.days {
        *regime_days
            .entry(format!("{:?}", day.regime).to_lowercase())
            .or_insert(0) += 1;
    }

    std::fs::create_dir_all(out)?;
    write_chain_input_csv(&out.join("chain.csv"), &quotes)?;
    write_market_input_csv(&out.join("market.csv"), &days)?;
    write_rates_input_csv(&out.join("rates.csv"), &days)?;
    let summary = SynthSummary {
        seed: cfg.synth.seed,
        n_days: days.len(),
        n_quotes: quotes.len(),
        regime_days,
    };
    write_json(&out.join("synth.json"), &summary)?;
    println!(
        "wrote {} days / {} quotes to {}",
        summary.n_days,
        summary.n_quotes,
        out.display()
    );
    Ok(())
}

// -------------------------------------------------------------- backtest

/// The single JSON artifact of a run: the effective configuration plus one
/// report per book.
#[derive(Debug, Serialize, Deserialize)]
struct ReportDoc {
    config: RunConfig,
    books: Vec<BookReport>,
}

/// Run every configured book against `store` and write the per-book files
/// plus the combined report under `out`.
fn run_books(store: &ChainStore, cfg: &RunConfig, out: &Path) -> Result<ReportDoc> {
    std::fs::create_dir_all(out)?;
    let mut books = Vec::new();
    for book in cfg.book_types() {
        let strict = run_backtest(store, book, &cfg.settings(MarkPolicy::Strict))?;
        let settings = cfg.settings(MarkPolicy::Robust);
        let robust = run_backtest(store, book, &settings)?;
        let report = assemble_report(&strict, &robust, &settings)?;

        let dir = out.join(book.as_str());
        std::fs::create_dir_all(&dir)?;
        write_records_csv(&dir.join("records.csv"), &robust.records)?;
        write_rolling_csv(&dir.join("rolling.csv"), &robust.records, cfg.rolling_window)?;
        write_ablation_csv(&dir.join("ablation.csv"), &report.ablation)?;
        write_panel_csv(&dir.join("panel.csv"), &robust.panel)?;
        books.push(report);
    }
    let doc = ReportDoc { config: cfg.clone(), books };
    write_json(&out.join("report.json"), &doc)?;
    verify_outputs(out, &doc)?;
    Ok(doc)
}

fn count_csv_rows(path: &Path) -> Result<usize> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut n = 0;
    for record in rdr.byte_records() {
        record?;
        n += 1;
    }
    Ok(n)
}

/// Re-read everything just written and check it against the in-memory run,
/// so a run never exits successfully with malformed artifacts.
fn verify_outputs(out: &Path, doc: &ReportDoc) -> Result<()> {
    let text = std::fs::read_to_string(out.join("report.json"))?;
    let parsed: ReportDoc = serde_json::from_str(&text)?;
    if parsed.books.len() != doc.books.len() {
        return Err(Error::Data("report.json does not match the run".into()));
    }
    let window = doc.config.rolling_window;
    for report in &doc.books {
        let dir = out.join(&report.book);
        let n = report.operational.robust_predictions;
        let got = count_csv_rows(&dir.join("records.csv"))?;
        if got != n {
            return Err(Error::Data(format!(
                "{}: records.csv holds {got} rows, expected {n}",
                report.book
            )));
        }
        let got = count_csv_rows(&dir.join("rolling.csv"))?;
        let expect = if n >= window { n - window + 1 } else { 0 };
        if got != expect {
            return Err(Error::Data(format!(
                "{}: rolling.csv holds {got} rows, expected {expect}",
                report.book
            )));
        }
        let got = count_csv_rows(&dir.join("ablation.csv"))?;
        if got != report.ablation.len() {
            return Err(Error::Data(format!(
                "{}: ablation.csv holds {got} rows, expected {}",
                report.book,
                report.ablation.len()
            )));
        }
        let got = count_csv_rows(&dir.join("panel.csv"))?;
        if got < n {
            return Err(Error::Data(format!(
                "{}: panel.csv holds {got} rows but the run predicted {n} dates",
                report.book
            )));
        }
    }
    Ok(())
}

fn conformal_line(report: &BookReport) -> String {
    let m = report
        .methods
        .iter()
        .find(|m| m.method == "conformal")
        .expect("report always carries the conformal method");
    format!(
        "book {}: {} predictions, conformal exceedance {}",
        report.book,
        m.n,
        fmt_rate(m.exceedance_rate)
    )
}

fn cmd_backtest(cfg: &RunConfig, out: &Path) -> Result<()> {
    let store = load_store(cfg)?;
    let doc = run_books(&store, cfg, out)?;
    for report in &doc.books {
        println!("{}", conformal_line(report));
    }
    println!("report written to {}", out.join("report.json").display());
    Ok(())
}

// ------------------------------------------------------------------ grid

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    Learner,
    Marking,
    Floor,
    Lambda,
    Window,
}

impl Axis {
    fn parse(s: &str) -> Option<Axis> {
        match s {
            "learner" => Some(Axis::Learner),
            "marking" => Some(Axis::Marking),
            "floor" => Some(Axis::Floor),
            "lambda" => Some(Axis::Lambda),
            "window" | "w" => Some(Axis::Window),
            _ => None,
        }
    }

    fn as_str(&self) -> &'static str {
        match self {
            Axis::Learner => "learner",
            Axis::Marking => "marking",
            Axis::Floor => "floor",
            Axis::Lambda => "lambda",
            Axis::Window => "window",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum AxisValue {
    Learner(String),
    Marking(MarkPolicy),
    Floor(Option<f64>),
    Lambda(f64),
    Window(usize),
}

impl AxisValue {
    fn label(&self) -> String {
        match self {
            AxisValue::Learner(s) => s.clone(),
            AxisValue::Marking(p) => p.as_str().to_string(),
            AxisValue::Floor(Some(f)) => format!("{f}"),
            AxisValue::Floor(None) => "none".to_string(),
            AxisValue::Lambda(l) => format!("{l}"),
            AxisValue::Window(w) => w.to_string(),
        }
    }
}

fn axis_values(axis: Axis, cfg: &RunConfig) -> Result<Vec<AxisValue>> {
    let values = match axis {
        Axis::Learner => vec![
            AxisValue::Learner("gbt".into()),
            AxisValue::Learner("linear".into()),
        ],
        Axis::Marking => vec![
            AxisValue::Marking(MarkPolicy::Strict),
            AxisValue::Marking(MarkPolicy::Robust),
        ],
        Axis::Floor => vec![AxisValue::Floor(Some(0.0)), AxisValue::Floor(None)],
        Axis::Lambda => cfg.grid_lambdas.iter().map(|l| AxisValue::Lambda(*l)).collect(),
        Axis::Window => cfg.grid_windows.iter().map(|w| AxisValue::Window(*w)).collect(),
    };
    if values.is_empty() {
        return Err(Error::Config(format!(
            "grid axis '{}' has no values in the config",
            axis.as_str()
        )));
    }
    Ok(values)
}

fn parse_axes(arg: &str) -> Result<Vec<Axis>> {
    let mut axes = Vec::new();
    for name in arg.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let axis = Axis::parse(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown grid axis '{name}'; expected learner, marking, floor, lambda, window"
            ))
        })?;
        if axes.contains(&axis) {
            return Err(Error::Config(format!("grid axis '{name}' listed twice")));
        }
        axes.push(axis);
    }
    if axes.is_empty() {
        return Err(Error::Config("grid needs at least one axis".into()));
    }
    Ok(axes)
}

/// One grid point: the settings override and the marking stream its summary
/// row reads.
struct Combo {
    values: Vec<(Axis, AxisValue)>,
}

impl Combo {
    fn label(&self) -> String {
        self.values
            .iter()
            .map(|(a, v)| format!("{}={}", a.as_str(), v.label()))
            .collect::<Vec<_>>()
            .join("_")
    }

    fn apply(&self, cfg: &RunConfig) -> Result<(RunConfig, MarkPolicy)> {
        let mut sub = cfg.clone();
        let mut marking = MarkPolicy::Robust;
        for (_, value) in &self.values {
            match value {
                AxisValue::Learner(s) => sub.learner = s.clone(),
                AxisValue::Marking(p) => marking = *p,
                AxisValue::Floor(f) => sub.floor = *f,
                AxisValue::Lambda(l) => sub.lambda = *l,
                AxisValue::Window(w) => sub.buffer_window = *w,
            }
        }
        sub.validate()?;
        Ok((sub, marking))
    }
}

fn cartesian(lists: &[Vec<AxisValue>], axes: &[Axis]) -> Vec<Combo> {
    let mut combos = vec![Vec::new()];
    for (axis, values) in axes.iter().zip(lists) {
        let mut next = Vec::with_capacity(combos.len() * values.len());
        for combo in &combos {
            for value in values {
                let mut extended: Vec<(Axis, AxisValue)> = combo.clone();
                extended.push((*axis, value.clone()));
                next.push(extended);
            }
        }
        combos = next;
    }
    combos.into_iter().map(|values| Combo { values }).collect()
}

fn fmt_rate(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".to_string())
}

fn cmd_grid(cfg: &RunConfig, out: &Path, axes_arg: &str) -> Result<()> {
    let axes = parse_axes(axes_arg)?;
    let lists: Vec<Vec<AxisValue>> = axes
        .iter()
        .map(|a| axis_values(*a, cfg))
        .collect::<Result<_>>()?;
    let combos = cartesian(&lists, &axes);
    // Resolve every override before spending time on data, so a bad grid
    // fails as a config error.
    let resolved: Vec<(RunConfig, MarkPolicy)> = combos
        .iter()
        .map(|c| c.apply(cfg))
        .collect::<Result<_>>()?;

    let store = load_store(cfg)?;
    std::fs::create_dir_all(out)?;
    let results: Vec<Result<ReportDoc>> = std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(combos.len());
        for (combo, (sub_cfg, _)) in combos.iter().zip(&resolved) {
            let dir = out.join(combo.label());
            let store = &store;
            handles.push(scope.spawn(move || run_books(store, sub_cfg, &dir)));
        }
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Data("grid worker panicked".into())))
            })
            .collect()
    });

    let mut w = csv::Writer::from_path(out.join("grid.csv"))?;
    w.write_record([
        "learner",
        "marking",
        "floor",
        "lambda",
        "window",
        "book",
        "n",
        "conformal_exceedance",
        "base_floored_exceedance",
    ])?;
    for ((combo, (sub_cfg, marking)), result) in combos.iter().zip(&resolved).zip(results) {
        let doc = result?;
        for report in &doc.books {
            let (n, conf, base) = summary_rates(report, *marking)?;
            w.write_record([
                sub_cfg.learner.clone(),
                marking.as_str().to_string(),
                sub_cfg.floor.map(|f| format!("{f}")).unwrap_or_else(|| "none".into()),
                format!("{}", sub_cfg.lambda),
                sub_cfg.buffer_window.to_string(),
                report.book.clone(),
                n.to_string(),
                conf.map(|v| format!("{v}")).unwrap_or_default(),
                base.map(|v| format!("{v}")).unwrap_or_default(),
            ])?;
        }
        println!("grid point {} done", combo.label());
    }
    w.flush()?;
    println!("grid summary written to {}", out.join("grid.csv").display());
    Ok(())
}

/// Pull the summary rates for one grid row from a sub-run report: strict
/// rows come from the ablation table, robust rows from the headline metrics.
fn summary_rates(
    report: &BookReport,
    marking: MarkPolicy,
) -> Result<(usize, Option<f64>, Option<f64>)> {
    match marking {
        MarkPolicy::Strict => {
            let find = |method: &str| {
                report
                    .ablation
                    .iter()
                    .find(|r| r.setting == "strict" && r.method == method)
                    .ok_or_else(|| {
                        Error::Data(format!("report lacks the strict {method} ablation row"))
                    })
            };
            let conf = find("conformal")?;
            let base = find("base_floored")?;
            Ok((conf.n, conf.exceedance_rate, base.exceedance_rate))
        }
        MarkPolicy::Robust => {
            let find = |method: &str| {
                report
                    .methods
                    .iter()
                    .find(|m| m.method == method)
                    .ok_or_else(|| Error::Data(format!("report lacks the {method} metrics")))
            };
            let conf = find("conformal")?;
            let base = find("base_floored")?;
            Ok((conf.n, conf.exceedance_rate, base.exceedance_rate))
        }
    }
}

// ---------------------------------------------------------------- report

fn cmd_report(out: &Path) -> Result<()> {
    let path = out.join("report.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    let doc: ReportDoc = serde_json::from_str(&text)?;

    println!(
        "alpha {}, learner {}, lambda {}, window {}",
        doc.config.alpha, doc.config.learner, doc.config.lambda, doc.config.buffer_window
    );
    for report in &doc.books {
        println!("\nbook {}", report.book);
        println!(
            "  {:<14} {:>6} {:>11} {:>15} {:>13} {:>9} {:>11}",
            "method", "n", "exceedance", "mean_threshold", "mean_pinball", "crisis_n", "crisis_exc"
        );
        for m in &report.methods {
            println!(
                "  {:<14} {:>6} {:>11} {:>15} {:>13} {:>9} {:>11}",
                m.method,
                m.n,
                fmt_rate(m.exceedance_rate),
                fmt_rate(m.mean_threshold),
                fmt_rate(m.mean_pinball),
                m.crisis_n,
                fmt_rate(m.crisis_exceedance),
            );
        }
        println!("  ablation:");
        println!(
            "  {:<22} {:<14} {:>6} {:>11} {:>9} {:>11}",
            "setting", "method", "n", "exceedance", "crisis_n", "crisis_exc"
        );
        for row in &report.ablation {
            println!(
                "  {:<22} {:<14} {:>6} {:>11} {:>9} {:>11}",
                row.setting,
                row.method,
                row.n,
                fmt_rate(row.exceedance_rate),
                row.crisis_n,
                fmt_rate(row.crisis_exceedance),
            );
        }
        let op = &report.operational;
        println!(
            "  operational: strict {} / robust {} predictions (retention {}), fallback share {}",
            op.strict_predictions,
            op.robust_predictions,
            fmt_rate(op.strict_retention),
            fmt_rate(op.fallback_share),
        );
        println!(
            "  regimes {:?}, fit failures strict {} robust {}",
            op.regime_counts, op.fit_failures_strict, op.fit_failures_robust
        );
    }
    Ok(())
}

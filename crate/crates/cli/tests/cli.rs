//! End-to-end checks of the binary: artifact layout, exit codes, byte
//! determinism, and the grid/backtest equivalence on a single cell.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_optvar")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

/// Small, fast run: one book, linear learner, short synthetic history.
const SMALL_CONFIG: &str = r#"{
  "version": 1,
  "learner": "linear",
  "books": ["atm_straddle"],
  "synth": {"n_days": 200, "seed": 11},
  "grid_lambdas": [0.99],
  "grid_windows": [250]
}"#;

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn backtest_quickstart_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    write(&cfg, SMALL_CONFIG);
    let out_dir = dir.path().join("out");
    let out = run(&["backtest", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("conformal exceedance"));

    let book = out_dir.join("atm_straddle");
    for name in ["records.csv", "rolling.csv", "ablation.csv", "panel.csv"] {
        let path = book.join(name);
        assert!(path.exists(), "{name} missing");
        let mut rdr = csv::Reader::from_path(&path).unwrap();
        for record in rdr.byte_records() {
            record.unwrap();
        }
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["books"][0]["book"], "atm_straddle");
    assert_eq!(report["config"]["alpha"], 0.1);
}

#[test]
fn identical_runs_produce_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    write(&cfg, SMALL_CONFIG);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_ok(&run(&["backtest", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()]));
    assert_ok(&run(&["backtest", "--config", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]));
    for name in ["report.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    for name in ["records.csv", "rolling.csv", "ablation.csv", "panel.csv"] {
        assert_eq!(
            fs::read(a.join("atm_straddle").join(name)).unwrap(),
            fs::read(b.join("atm_straddle").join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn config_schema_violation_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    write(&cfg, r#"{"version": 1, "alpha": 2.0}"#);
    let out = run(&["backtest", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
}

#[test]
fn unknown_config_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.json");
    write(&cfg, r#"{"version": 1, "alhpa": 0.1}"#);
    let out = run(&["backtest", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alhpa"));
}

#[test]
fn missing_data_path_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    write(
        &cfg,
        r#"{"version": 1, "data": {"csv": {"chain": "/nonexistent/c.csv", "market": "/nonexistent/m.csv", "rates": "/nonexistent/r.csv"}}}"#,
    );
    let out = run(&["backtest", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));
}

#[test]
fn synth_ingest_round_trip_reconciles() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    write(&cfg, r#"{"version": 1, "synth": {"n_days": 30, "seed": 5}}"#);
    let feed = dir.path().join("feed");
    assert_ok(&run(&["synth", "--config", cfg.to_str().unwrap(), "--out", feed.to_str().unwrap()]));

    let out_dir = dir.path().join("ingested");
    let out = run(&[
        "ingest",
        "--chain",
        feed.join("chain.csv").to_str().unwrap(),
        "--market",
        feed.join("market.csv").to_str().unwrap(),
        "--rates",
        feed.join("rates.csv").to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("ingest.json")).unwrap()).unwrap();
    let synth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(feed.join("synth.json")).unwrap()).unwrap();
    assert_eq!(summary["n_days"], synth["n_days"]);
    assert_eq!(summary["n_quotes_in"], synth["n_quotes"]);
    // Every raw row lands in exactly one bucket, per day and in total.
    let t = &summary["totals"];
    let dropped: u64 = [
        "duplicate",
        "dte_window",
        "moneyness_window",
        "nonpositive_bid",
        "crossed_quote",
        "small_mid",
        "missing_iv",
        "wide_spread",
        "inactive",
    ]
    .iter()
    .map(|k| t[k].as_u64().unwrap())
    .sum();
    assert_eq!(t["raw_rows"].as_u64().unwrap(), t["retained"].as_u64().unwrap() + dropped);
    assert_eq!(summary["n_quotes_in"].as_u64(), t["raw_rows"].as_u64());
}

#[test]
fn ingest_empty_chain_file_warns_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let chain = dir.path().join("chain.csv");
    fs::File::create(&chain).unwrap();
    let market = dir.path().join("market.csv");
    write(&market, "date,spot,div_yield,vix,vxv\n2024-01-02,4000,0.015,14,15\n");
    let rates = dir.path().join("rates.csv");
    write(&rates, "date,tenor_days,rate\n2024-01-02,30,0.02\n");

    let out_dir = dir.path().join("out");
    let out = run(&[
        "ingest",
        "--chain",
        chain.to_str().unwrap(),
        "--market",
        market.to_str().unwrap(),
        "--rates",
        rates.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("ingest.json")).unwrap()).unwrap();
    assert_eq!(summary["n_quotes_in"], 0);
    assert_eq!(summary["n_days"], 1);
}

#[test]
fn ingest_corrupt_date_cell_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let chain = dir.path().join("chain.csv");
    write(
        &chain,
        "trade_date,expiry,strike,type,bid,ask,iv,delta,open_interest,volume\n\
         2024-01-02,2024-02-02,4000,C,10.0,10.5,0.2,0.5,100,5\n\
         not-a-date,2024-02-02,4000,C,10.0,10.5,0.2,0.5,100,5\n",
    );
    let market = dir.path().join("market.csv");
    write(&market, "date,spot,div_yield,vix,vxv\n2024-01-02,4000,0.015,14,15\n");
    let rates = dir.path().join("rates.csv");
    write(&rates, "date,tenor_days,rate\n2024-01-02,30,0.02\n");

    let out = run(&[
        "ingest",
        "--chain",
        chain.to_str().unwrap(),
        "--market",
        market.to_str().unwrap(),
        "--rates",
        rates.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line: 3") || err.contains("line 3"), "stderr: {err}");
}

#[test]
fn grid_single_cell_matches_backtest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    write(&cfg, SMALL_CONFIG);
    let bt = dir.path().join("bt");
    let grid = dir.path().join("grid");
    assert_ok(&run(&["backtest", "--config", cfg.to_str().unwrap(), "--out", bt.to_str().unwrap()]));
    assert_ok(&run(&[
        "grid",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        grid.to_str().unwrap(),
        "--axes",
        "lambda,window",
    ]));

    // The single cell carries the same lambda and window as the base config,
    // so its artifacts must be byte-identical to the plain backtest.
    let cell = grid.join("lambda=0.99_window=250");
    assert_eq!(
        fs::read(bt.join("report.json")).unwrap(),
        fs::read(cell.join("report.json")).unwrap()
    );
    for name in ["records.csv", "rolling.csv", "ablation.csv", "panel.csv"] {
        assert_eq!(
            fs::read(bt.join("atm_straddle").join(name)).unwrap(),
            fs::read(cell.join("atm_straddle").join(name)).unwrap(),
            "{name}"
        );
    }
    let grid_csv = fs::read_to_string(grid.join("grid.csv")).unwrap();
    assert_eq!(grid_csv.lines().count(), 2, "header plus one row: {grid_csv}");
}

#[test]
fn grid_two_axes_produce_four_subruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    write(
        &cfg,
        r#"{
          "version": 1,
          "learner": "linear",
          "books": ["atm_straddle"],
          "synth": {"n_days": 160, "seed": 11},
          "grid_lambdas": [0.97, 0.99],
          "grid_windows": [125, 250]
        }"#,
    );
    let out_dir = dir.path().join("grid");
    assert_ok(&run(&["grid", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]));
    for cell in [
        "lambda=0.97_window=125",
        "lambda=0.97_window=250",
        "lambda=0.99_window=125",
        "lambda=0.99_window=250",
    ] {
        assert!(out_dir.join(cell).join("report.json").exists(), "{cell}");
    }
    let first = fs::read(out_dir.join("grid.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), 5);

    // Rerunning the sweep reproduces the summary byte for byte.
    let again = dir.path().join("grid2");
    assert_ok(&run(&["grid", "--config", cfg.to_str().unwrap(), "--out", again.to_str().unwrap()]));
    assert_eq!(first, fs::read(again.join("grid.csv")).unwrap());
}

#[test]
fn grid_rejects_unknown_and_empty_axes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    write(&cfg, SMALL_CONFIG);
    let out = run(&[
        "grid",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--axes",
        "volatility",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("volatility"));

    let out = run(&[
        "grid",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--axes",
        "",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn report_prints_the_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    write(&cfg, SMALL_CONFIG);
    let out_dir = dir.path().join("out");
    assert_ok(&run(&["backtest", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]));
    let out = run(&["report", "--out", out_dir.to_str().unwrap()]);
    assert_ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("book atm_straddle"));
    assert!(text.contains("conformal"));
    assert!(text.contains("robust_full"));
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    write(&cfg, r#"{"version": 1, "synth": {"n_days": 5, "seed": 5}}"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    assert_ok(&run(&["synth", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", a.to_str().unwrap()]));
    assert_ok(&run(&["synth", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", b.to_str().unwrap()]));
    assert_ok(&run(&["synth", "--config", cfg.to_str().unwrap(), "--out", c.to_str().unwrap()]));
    let a_bytes = fs::read(a.join("chain.csv")).unwrap();
    assert_eq!(a_bytes, fs::read(b.join("chain.csv")).unwrap());
    assert_ne!(a_bytes, fs::read(c.join("chain.csv")).unwrap());
}

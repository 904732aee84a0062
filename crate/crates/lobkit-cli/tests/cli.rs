//! End-to-end checks of the `lobkit` binary: every subcommand, the exit-code
//! contract, determinism per seed, and JSON outputs against the shipped
//! schemas.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn lobkit() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lobkit"))
}

fn run(args: &[&str]) -> Output {
    lobkit().args(args).output().expect("spawn lobkit")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "lobkit {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

fn assert_schema(schema_file: &str, instance_path: &Path) {
    let schema: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(schema_dir().join(schema_file)).unwrap())
            .unwrap();
    let instance: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(instance_path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("compile schema");
    let errors: Vec<String> = validator.iter_errors(&instance).map(|e| e.to_string()).collect();
    assert!(
        errors.is_empty(),
        "{instance_path:?} does not validate against {schema_file}: {errors:?}"
    );
}

#[test]
fn tape_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let tape = dir.path().join("tape.csv");
    let series = dir.path().join("series.json");

    run_ok(&[
        "--seed", "7",
        "gen-tape",
        "--out", tape.to_str().unwrap(),
        "--n", "2500",
        "--impact-rate", "0.98",
        "--recovery-rate", "0.97",
    ]);
    // determinism: same seed, byte-identical tape
    let tape2 = dir.path().join("tape2.csv");
    run_ok(&["--seed", "7", "gen-tape", "--out", tape2.to_str().unwrap(), "--n", "2500",
        "--impact-rate", "0.98", "--recovery-rate", "0.97"]);
    assert_eq!(fs::read(&tape).unwrap(), fs::read(&tape2).unwrap());

    run_ok(&["ingest", "--tape", tape.to_str().unwrap(), "--out", series.to_str().unwrap()]);
    assert_schema("series.schema.json", &series);

    let report = dir.path().join("validation.json");
    run_ok(&["validate", "--series", series.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert_schema("validation-report.schema.json", &report);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let frac = v["impact"]["fraction"].as_f64().unwrap();
    assert!(frac > 0.0 && frac < 0.1, "impact fraction {frac}");

    let rec = dir.path().join("reconstruct.json");
    let rec_csv = dir.path().join("wealth.csv");
    run_ok(&[
        "reconstruct",
        "--series", series.to_str().unwrap(),
        "--model", "proposed",
        "--out", rec.to_str().unwrap(),
        "--out-csv", rec_csv.to_str().unwrap(),
    ]);
    assert_schema("reconstruct-report.schema.json", &rec);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&rec).unwrap()).unwrap();
    assert_eq!(v["max_abs_deviation_from_ledger"].as_f64().unwrap(), 0.0);
    let csv = fs::read_to_string(&rec_csv).unwrap();
    assert!(csv.starts_with("n,ledger,frictionless,classical,proposed,model\n"));

    let tox = dir.path().join("toxicity.json");
    run_ok(&[
        "toxicity",
        "--series", series.to_str().unwrap(),
        "--window", "0:1999",
        "--out", tox.to_str().unwrap(),
    ]);
    assert_schema("toxicity-report.schema.json", &tox);

    // general-book model driven by a deep static book
    let book = dir.path().join("book.json");
    fs::write(
        &book,
        r#"{"tick":0.0001,"bids":[[99.8,500.0],[99.99,500.0]],"asks":[[100.01,500.0],[100.2,500.0]]}"#,
    )
    .unwrap();
    let gen = dir.path().join("general.json");
    run_ok(&[
        "reconstruct",
        "--series", series.to_str().unwrap(),
        "--model", "general",
        "--book-costs", book.to_str().unwrap(),
        "--out", gen.to_str().unwrap(),
    ]);
    assert_schema("reconstruct-report.schema.json", &gen);

    let cov = dir.path().join("covartest.json");
    let cov_csv = dir.path().join("covartest.csv");
    run_ok(&[
        "covartest",
        "--series", series.to_str().unwrap(),
        "--window", "100",
        "--out", cov.to_str().unwrap(),
        "--out-csv", cov_csv.to_str().unwrap(),
    ]);
    assert_schema("covariation-report.schema.json", &cov);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&cov).unwrap()).unwrap();
    assert!(v["overall_rejection"].as_f64().unwrap() > 0.5);

    // report: assemble the per-symbol table from covartest outputs
    let inputs = dir.path().join("reports");
    fs::create_dir(&inputs).unwrap();
    fs::copy(&cov, inputs.join("synth.json")).unwrap();
    let table = dir.path().join("table.csv");
    let out = run_ok(&["report", "--inputs", inputs.to_str().unwrap(), "--out", table.to_str().unwrap()]);
    let table_csv = fs::read_to_string(&table).unwrap();
    assert!(table_csv
        .starts_with("stock,proba reject,nb false,nb trades,percent false,recovery rejection\n"));
    assert!(table_csv.lines().nth(1).unwrap().starts_with("SYNTH,"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("proba reject"));
}

#[test]
fn simulate_checks_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    fs::write(
        &config,
        r#"{
        "coefficients": {
            "mu": {"type": "constant", "value": 0.0},
            "sigma": {"type": "constant", "value": 1.0},
            "b": {"type": "constant", "value": 0.0},
            "l": {"type": "constant", "value": 1.0},
            "rho": {"type": "constant", "value": 0.0},
            "spread": {"type": "constant", "value": 0.02},
            "lambda_r": 1.0
        },
        "sim": {"steps_per_unit": 512, "paths": 40, "horizon": 1.0, "seed": 5},
        "recovery": {"t1": 0.0, "t2": 1.0},
        "cost": {"type": "quadratic", "depth": 1.0}
    }"#,
    )
    .unwrap();

    let out1 = dir.path().join("spread.json");
    run_ok(&["simulate", "--config", config.to_str().unwrap(), "--check", "spread-limit",
        "--out", out1.to_str().unwrap()]);
    assert_schema("convergence-report.schema.json", &out1);
    let again = dir.path().join("spread2.json");
    run_ok(&["simulate", "--config", config.to_str().unwrap(), "--check", "spread-limit",
        "--out", again.to_str().unwrap()]);
    assert_eq!(fs::read(&out1).unwrap(), fs::read(&again).unwrap());

    let rec = dir.path().join("recovery.json");
    run_ok(&["simulate", "--config", config.to_str().unwrap(), "--check", "recovery",
        "--out", rec.to_str().unwrap()]);
    assert_schema("convergence-report.schema.json", &rec);

    let gc = dir.path().join("general.json");
    run_ok(&["simulate", "--config", config.to_str().unwrap(), "--check", "general-cost",
        "--out", gc.to_str().unwrap()]);
    assert_schema("general-cost-report.schema.json", &gc);

    let sd = dir.path().join("sd.json");
    run_ok(&["simulate", "--config", config.to_str().unwrap(), "--check", "supply-demand",
        "--out", sd.to_str().unwrap()]);
    assert_schema("supply-demand-report.schema.json", &sd);

    let fb = dir.path().join("fb.json");
    run_ok(&["simulate", "--config", config.to_str().unwrap(), "--check", "flat-book",
        "--out", fb.to_str().unwrap()]);
    assert_schema("flat-book-report.schema.json", &fb);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&fb).unwrap()).unwrap();
    assert!(v["max_half_square_error"].as_f64().unwrap() < 1e-12);

    // --seed overrides the config seed
    let seeded = dir.path().join("seeded.json");
    run_ok(&["--seed", "99", "simulate", "--config", config.to_str().unwrap(),
        "--check", "spread-limit", "--out", seeded.to_str().unwrap()]);
    assert_ne!(fs::read(&out1).unwrap(), fs::read(&seeded).unwrap());
}

#[test]
fn hedge_and_mm_commands() {
    let dir = tempfile::tempdir().unwrap();
    let hedge_json = dir.path().join("hedge.json");
    let hedge_csv = dir.path().join("hedge.csv");
    run_ok(&[
        "hedge",
        "--payoff", "call:100",
        "--lambda", "1.0",
        "--sigma", "0.2",
        "--grid", "45:220:200:200",
        "--out", hedge_json.to_str().unwrap(),
        "--out-csv", hedge_csv.to_str().unwrap(),
    ]);
    assert_schema("hedge-report.schema.json", &hedge_json);
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&hedge_json).unwrap()).unwrap();
    let price = v["value_at_spot"].as_f64().unwrap();
    assert!((price - 7.965).abs() < 0.1, "ATM call {price}");
    assert!(fs::read_to_string(&hedge_csv)
        .unwrap()
        .starts_with("price,value,delta,gamma,theta,l,order_type\n"));

    let mm_json = dir.path().join("mm.json");
    run_ok(&[
        "mm",
        "--model", "martingale",
        "--f", "inv-square",
        "--rho", "inv",
        "--T", "1.0",
        "--out", mm_json.to_str().unwrap(),
    ]);
    assert_schema("mm-solution.schema.json", &mm_json);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&mm_json).unwrap()).unwrap();
    let spreads = v["spreads"].as_array().unwrap();
    let first = spreads[0].as_f64().unwrap();
    assert!((first - 2.918884).abs() < 1e-3, "martingale spread {first}");
    assert!(spreads.iter().all(|s| (s.as_f64().unwrap() - first).abs() < 1e-9));
}

#[test]
fn exit_codes_and_error_prefixes() {
    // unknown flag: exit 1 with usage text on stderr
    let out = run(&["toxicity", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("E:usage:"), "stderr: {stderr}");
    assert!(stderr.to_lowercase().contains("usage"), "stderr: {stderr}");

    // missing file: exit 2 with the io prefix
    let out = run(&["ingest", "--tape", "/nonexistent/tape.csv", "--out", "/tmp/x.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("E:io:"));

    // domain error: exit 1 with the invalid prefix
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("series.json");
    fs::write(
        &series,
        r#"{"tick":1e-4,"p_half_ticks":[2000000,2000002],"s_half_ticks":[400,400],"delta_l":[1,0],"delta_k_units":[-1999800,0]}"#,
    )
    .unwrap();
    let out = run(&["toxicity", "--series", series.to_str().unwrap(), "--window", "0:99"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("E:invalid:"));

    // help goes to stdout and succeeds
    let out = run(&["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("selfcheck"));
}

#[test]
fn selfcheck_passes_on_clean_build() {
    let out = run_ok(&["selfcheck"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().filter(|l| l.starts_with("PASS")).count() >= 9);
    assert!(!stdout.contains("FAIL"));
}

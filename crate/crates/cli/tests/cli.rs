use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fda2s::TestResult;
use tempfile::TempDir;

fn fda2s(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fda2s"))
        .args(args)
        .env_remove("FDA2S_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = fda2s(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &TempDir, name: &str, seed: u64) -> PathBuf {
    let p = path(dir, name);
    ok(&["simulate", "--hs", "2", "--tp", "4.0", "--seed", &seed.to_string(), "-o", s(&p)]);
    p
}

#[test]
fn simulate_writes_header_and_one_line_per_sample() {
    let dir = TempDir::new().unwrap();
    let out = ok(&["simulate", "--hs", "2", "--tp", "4.0", "--duration", "1800", "--fs", "1.28", "--seed", "9"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2305);
    assert_eq!(lines[0], "fs=1.28,t0=0");
    let a = simulate(&dir, "a.csv", 9);
    assert_eq!(std::fs::read_to_string(a).unwrap(), text);
}

#[test]
fn simulate_is_byte_identical_per_seed() {
    let dir = TempDir::new().unwrap();
    let a = std::fs::read(simulate(&dir, "a.csv", 4)).unwrap();
    let b = std::fs::read(simulate(&dir, "b.csv", 4)).unwrap();
    let c = std::fs::read(simulate(&dir, "c.csv", 5)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn simulate_rejects_negative_height() {
    let out = fda2s(&["simulate", "--hs", "-1", "--tp", "4", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hs"));
}

#[test]
fn simulate_reports_entropy_seed() {
    let out = ok(&["simulate", "--hs", "2", "--tp", "4", "--duration", "60"]);
    let err = String::from_utf8(out.stderr).unwrap();
    let seed: u64 = err.trim().strip_prefix("seed: ").unwrap().parse().unwrap();
    let again = ok(&["simulate", "--hs", "2", "--tp", "4", "--duration", "60", "--seed", &seed.to_string()]);
    assert_eq!(out.stdout, again.stdout);
}

#[test]
fn spectrum_defaults_match_explicit_parzen_and_preserve_variance() {
    let dir = TempDir::new().unwrap();
    let rec = simulate(&dir, "r.csv", 2);
    let default = ok(&["spectrum", "--input", s(&rec)]).stdout;
    let explicit = ok(&["spectrum", "--input", s(&rec), "--parzen", "60"]).stdout;
    assert_eq!(default, explicit);
    let other = ok(&["spectrum", "--input", s(&rec), "--parzen", "30"]).stdout;
    assert_ne!(default, other);

    let spectrum = fda2s::io::parse_spectrum(&String::from_utf8(default).unwrap()).unwrap();
    let record = fda2s::io::read_record(&rec).unwrap();
    assert!((spectrum.variance() / record.variance() - 1.0).abs() < 0.02);
}

#[test]
fn spectrum_of_short_record_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let p = path(&dir, "short.csv");
    std::fs::write(&p, "fs=1.28,t0=0\n0.1\n-0.2\n0.3\n").unwrap();
    assert_eq!(fda2s(&["spectrum", "--input", s(&p)]).status.code(), Some(2));
}

#[test]
fn segment_flat_record_has_no_waves() {
    let dir = TempDir::new().unwrap();
    let p = path(&dir, "flat.csv");
    std::fs::write(&p, format!("fs=1.28,t0=0\n{}", "0.5\n".repeat(200))).unwrap();
    assert_eq!(fda2s(&["segment", "--input", s(&p)]).status.code(), Some(3));
    assert_eq!(fda2s(&["segment", "--input", s(&p), "--register"]).status.code(), Some(3));
}

#[test]
fn segment_sidecar_counts_match_rows() {
    let dir = TempDir::new().unwrap();
    let rec = simulate(&dir, "r.csv", 3);
    for register in [false, true] {
        let out = path(&dir, if register { "reg.csv" } else { "raw.csv" });
        let mut args = vec!["segment", "--input", s(&rec), "-o", s(&out)];
        if register {
            args.push("--register");
        }
        ok(&args);
        let rows = std::fs::read_to_string(&out).unwrap().lines().count() - 1;
        let sidecar: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(format!("{}.json", out.display())).unwrap()).unwrap();
        assert_eq!(sidecar["n_waves"].as_u64().unwrap() as usize, rows);
        assert_eq!(sidecar["periods"].as_array().unwrap().len(), rows);
    }
}

#[test]
fn malformed_sample_reports_line_number() {
    let dir = TempDir::new().unwrap();
    let p = path(&dir, "bad.csv");
    std::fs::write(&p, "0,0.5,1\n1,2,3\n4,5\n").unwrap();
    let out = fda2s(&["test", "--x", s(&p), "--y", s(&p), "--basis", "indicator:k=2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

fn registered_waves(dir: &TempDir, seed: u64) -> PathBuf {
    let rec = simulate(dir, &format!("rec{seed}.csv"), seed);
    let out = path(dir, &format!("waves{seed}.csv"));
    ok(&["segment", "--input", s(&rec), "--register", "--constrain-upcross", "-o", s(&out)]);
    out
}

#[test]
fn odd_trig_basis_gives_one_degree_of_freedom() {
    let dir = TempDir::new().unwrap();
    let (x, y) = (registered_waves(&dir, 1), registered_waves(&dir, 2));
    let out = ok(&["test", "--x", s(&x), "--y", s(&y), "--basis", "trig:k=3,parts=odd"]);
    let res = TestResult::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(res.k, 1);
    assert!(res.p_resampled.is_none());
}

#[test]
fn identical_samples_give_top_pvalue() {
    let dir = TempDir::new().unwrap();
    let x = registered_waves(&dir, 6);
    let out = ok(&[
        "test",
        "--x",
        s(&x),
        "--y",
        s(&x),
        "--basis",
        "indicator:k=4",
        "--calibration",
        "permutation:B=199",
        "--seed",
        "1",
    ]);
    let res = TestResult::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let p = res.p_resampled.unwrap();
    assert!(p >= 0.5, "p = {p}");
    assert_eq!(res.n_resamples, Some(199));
    assert_eq!(res.seed, Some(1));
}

#[test]
fn report_json_round_trips_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let (x, y) = (registered_waves(&dir, 7), registered_waves(&dir, 8));
    let report = path(&dir, "report.json");
    ok(&[
        "test",
        "--x",
        s(&x),
        "--y",
        s(&y),
        "--basis",
        "trig:k=3,parts=both",
        "--calibration",
        "permutation:B=99",
        "--seed",
        "4",
        "-o",
        s(&report),
    ]);
    let text = std::fs::read_to_string(&report).unwrap();
    let back = TestResult::from_json(&text).unwrap();
    assert_eq!(back.to_json() + "\n", text);
}

#[test]
fn test_output_does_not_depend_on_thread_count() {
    let dir = TempDir::new().unwrap();
    let (x, y) = (registered_waves(&dir, 9), registered_waves(&dir, 10));
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_fda2s"))
            .args(["test", "--x", s(&x), "--y", s(&y), "--basis", "pca:d=2,weights=equal"])
            .args(["--calibration", "permutation:B=99", "--seed", "2"])
            .env("FDA2S_THREADS", threads)
            .output()
            .unwrap()
    };
    let (one, four) = (run("1"), run("4"));
    assert!(one.status.success());
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(run("zero").status.code(), Some(2));
}

#[test]
fn quantiles_table_from_values_file() {
    let dir = TempDir::new().unwrap();
    let p = path(&dir, "null.txt");
    // Exact χ²₂ quantiles at (i + 0.5) / 4000 via the exponential inverse CDF.
    let values: String = (0..4000)
        .map(|i| format!("{}\n", -2.0 * (1.0 - (i as f64 + 0.5) / 4000.0).ln()))
        .collect();
    std::fs::write(&p, values).unwrap();
    let out = ok(&["quantiles", "--null-values", s(&p), "--k", "2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "p,0.5,0.9,0.95,0.975,0.99");
    assert!(rows[1].starts_with("Asymptotic,"));
    assert!(rows[2].starts_with("MC,"));
    assert!(rows[3].starts_with("Rel. error,"));
    for e in rows[3].split(',').skip(1) {
        assert!(e.parse::<f64>().unwrap().abs() < 0.01, "{e}");
    }
}

#[test]
fn quantiles_bad_value_reports_line() {
    let dir = TempDir::new().unwrap();
    let p = path(&dir, "null.txt");
    std::fs::write(&p, "1.0\n2.0\noops\n").unwrap();
    let out = fda2s(&["quantiles", "--null-values", s(&p), "--k", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn quantiles_generate_is_deterministic() {
    let args = ["quantiles", "--generate", "--b", "100", "--m", "3", "--n", "3", "--duration", "600"];
    let a = ok(&[&args[..], &["--seed", "5", "--basis", "indicator:k=2"]].concat()).stdout;
    let b = ok(&[&args[..], &["--seed", "5", "--basis", "indicator:k=2"]].concat()).stdout;
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 4);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "cfg.json");
    std::fs::write(&cfg, r#"{"seed": 11, "simulate": {"hs": 2, "tp": 4, "duration": 100}}"#).unwrap();
    let from_file = ok(&["--config", s(&cfg), "simulate"]).stdout;
    let explicit = ok(&["simulate", "--hs", "2", "--tp", "4", "--duration", "100", "--seed", "11"]).stdout;
    assert_eq!(from_file, explicit);
    let overridden = ok(&["--config", s(&cfg), "simulate", "--duration", "50"]).stdout;
    assert_eq!(String::from_utf8(overridden).unwrap().lines().count(), 65);

    std::fs::write(&cfg, r#"{"simulate": {"height": 2}}"#).unwrap();
    assert_eq!(fda2s(&["--config", s(&cfg), "simulate"]).status.code(), Some(2));
}

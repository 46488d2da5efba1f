use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn opconc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opconc"))
        .args(args)
        .env_remove("OPCONC_NUMERIC_POLICY")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, value: &Value) -> String {
    let path = dir.path().join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn error_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    reader.records().map(|r| r.unwrap().iter().map(str::to_string).collect()).collect()
}

fn rademacher_2x2() -> Value {
    json!({
        "seed_root": 11,
        "family": {"kind": "rademacher_series", "coeffs": [
            {"dim": 2, "rows": [[1.0, 0.0], [0.0, 0.5]]},
            {"dim": 2, "rows": [[0.0, 1.0], [1.0, 0.0]]},
            {"dim": 2, "rows": [[0.3, 0.2], [0.2, -0.4]]}
        ]}
    })
}

#[test]
fn hoeffding_bound_table() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, &json!({"bound": {
        "proxy": {"trace_v": 20.0, "sigma_sq": 10.0},
        "bounds": [{"kind": "hoeffding"}],
        "modes": ["opnorm"],
        "r_grid": [2.0, 8.0]
    }}));
    let out_dir = dir.path().join("out");
    let out = opconc(&["bound", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let rows = read_csv(&out_dir.join("bound.csv"));
    assert_eq!(rows.len(), 2);
    let raw: f64 = rows[1][4].parse().unwrap();
    // mpmath: 4 exp(-16/5)
    assert!((raw - 0.163_048_815_913_464_83).abs() < 1e-15);
    assert_eq!(rows[0][5].parse::<f64>().unwrap(), 1.0);
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["command"], "bound");
    assert_eq!(summary["pass"], true);
}

#[test]
fn empty_grid_gives_header_only() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, &json!({"bound": {
        "proxy": {"trace_v": 20.0, "sigma_sq": 10.0},
        "bounds": [{"kind": "subgaussian"}],
        "r_grid": []
    }}));
    let out = opconc(&["bound", "--config", &config]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("# bound.csv\nkind,mode,r,theta,raw_bound,clamped_bound\nPASS"));
}

#[test]
fn intrinsic_dimension_below_one_is_rejected() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, &json!({"bound": {
        "proxy": {"trace_v": 1.0, "sigma_sq": 2.0},
        "bounds": [{"kind": "hoeffding"}],
        "r_grid": [1.0]
    }}));
    let out = opconc(&["bound", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert!(err["error"]["message"].as_str().unwrap().contains("d′ ≥ 1"), "{err}");
}

#[test]
fn unknown_field_is_rejected() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, &json!({"bound": {
        "proxy": {"trace_v": 20.0, "sigma_sq": 10.0},
        "bounds": [{"kind": "hoeffding"}],
        "r_grid": [1.0],
        "rgrid": [2.0]
    }}));
    let out = opconc(&["bound", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "schema");
}

#[test]
fn missing_section_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, &json!({}));
    let out = opconc(&["simulate", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_defaults_pass() {
    let out = opconc(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    for suite in ["phi_exp", "g_exp", "g_phi", "h_bound", "trace"] {
        assert!(text.contains(&format!("PASS {suite}:")), "{text}");
    }
}

#[test]
fn perturbed_phi_fails_with_location() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, &json!({"verify": {"phi_perturbation": 1e-3}}));
    let out = opconc(&["verify", "--config", &config, "--suite", "phi_exp"]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    let fail = text.lines().find(|l| l.starts_with("FAIL phi_exp:")).expect("failure line");
    assert!(fail.contains(" at "), "{fail}");
}

#[test]
fn single_suite_runs_alone() {
    let out = opconc(&["verify", "--suite", "h_bound"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("h_bound,10000,0"));
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).count(), 1);
    let bad = opconc(&["verify", "--suite", "nope"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn enumerate_against_bounds() {
    let dir = TempDir::new().unwrap();
    let coeffs: Vec<Value> = (0..10)
        .map(|k| {
            let a = 0.2 + 0.05 * k as f64;
            json!({"dim": 2, "rows": [[a, 0.1], [0.1, -a / 2.0]]})
        })
        .collect();
    let config = write_config(&dir, &json!({"enumerate": {
        "ensemble": {"seed_root": 0, "family": {"kind": "rademacher_series", "coeffs": coeffs}},
        "r_grid": [0.0, 0.5, 1.0, 2.0, 3.0, 4.0],
        "statistic": {"kind": "sup_op_norm"},
        "bounds": [{"kind": "subgaussian"}, {"kind": "hoeffding"}]
    }}));
    let out = opconc(&["enumerate", "--config", &config]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert_eq!(stdout(&out).lines().filter(|l| l.starts_with("sup_op_norm")).count(), 12);
}

fn simulate_config(dir: &TempDir) -> String {
    write_config(dir, &json!({"simulate": {
        "ensemble": rademacher_2x2(),
        "n": 3,
        "trials": 3000,
        "tails": {"r_grid": [0.5, 1.0, 2.0, 3.0], "bounds": [{"kind": "subgaussian"}]},
        "supermartingale": [{"v_kind": "bracket", "psi": {"kind": "normal"}, "theta": 0.7}],
        "submartingale": [{"theta": 0.5, "f": "varphi"}],
        "coverage": [{"delta": 0.1}]
    }}))
}

#[test]
fn simulate_is_byte_deterministic_across_threads() {
    let dir = TempDir::new().unwrap();
    let config = simulate_config(&dir);
    let first = opconc(&["simulate", "--config", &config]);
    assert_eq!(first.status.code(), Some(0), "{}", stdout(&first));
    let again = opconc(&["simulate", "--config", &config]);
    let threaded = opconc(&["simulate", "--config", &config, "--threads", "4"]);
    assert_eq!(first.stdout, again.stdout);
    assert_eq!(first.stdout, threaded.stdout);

    let a = dir.path().join("a");
    let b = dir.path().join("b");
    opconc(&["simulate", "--config", &config, "--out", a.to_str().unwrap(), "--threads", "1"]);
    opconc(&["simulate", "--config", &config, "--out", b.to_str().unwrap(), "--threads", "3"]);
    for name in ["tails.csv", "supermartingale.csv", "submartingale.csv", "coverage.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn max_trials_caps_work() {
    let dir = TempDir::new().unwrap();
    let config = simulate_config(&dir);
    let out_dir = dir.path().join("out");
    opconc(&["simulate", "--config", &config, "--max-trials", "100", "--out", out_dir.to_str().unwrap()]);
    let rows = read_csv(&out_dir.join("coverage.csv"));
    assert_eq!(rows[0][4], "100");
}

#[test]
fn numeric_policy_from_config_is_validated() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, &json!({"numeric_policy": {"bogus": 1}}));
    let out = opconc(&["compare", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_constants_and_sharpening() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, &json!({"compare": {
        "martingale": {"ev_spectrum": [1.0], "sigma_sq": 1.0, "c": 1.0, "r_grid": [0.1, 2.0]}
    }}));
    let out_dir = dir.path().join("out");
    let out = opconc(&["compare", "--config", &config, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let constants = read_csv(&out_dir.join("constants.csv"));
    let row = constants.iter().find(|r| r[0] == "opnorm" && r[1] == "minsker").unwrap();
    assert_eq!(row[4].parse::<f64>().unwrap(), 1.0 / 7.0);
    let sharpening = read_csv(&out_dir.join("sharpening.csv"));
    assert_eq!(sharpening[0][4], "false");
    // mpmath: 2e/(e-1)/25
    assert!((sharpening[1][3].parse::<f64>().unwrap() - 0.126_558_136_549_546_11).abs() < 1e-14);
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use singfde_cli::config;

const BIN: &str = env!("CARGO_BIN_EXE_singfde");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn cfg(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("SINGFDE_THREADS").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn model_solve_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = run(&["solve", "--config", &cfg("model_plus.cfg"), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("t,x\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 513);
    for r in rows {
        let (t, x): (f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        assert!((x - t / 2.0).abs() <= 1e-12, "t={t} x={x}");
    }
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("x.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "converged");
    assert_eq!(report["problem"], "cauchy_plus");
}

#[test]
fn minus_model_is_exact_at_nodes() {
    let o = run(&["solve", "--config", &cfg("model_minus.cfg"), "--mesh", "64"]);
    assert_eq!(code(&o), 0);
    for r in csv_rows(&stdout(&o)) {
        let (t, x): (f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        assert!((x - t).abs() <= 1e-14, "t={t} x={x}");
    }
}

#[test]
fn config_error_exits_one_with_line() {
    let o = run(&["solve", "--config", &cfg("bad_k.cfg")]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2: k must be nonzero"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, "[equation]\nk = 1\nspeed = 3\n[data]\nf = 1\n").unwrap();
    let o = run(&["solve", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3: unknown key 'speed'"));

    let o = run(&["solve", "--config", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["region", "--samples", "3"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
    let o = Command::new(BIN).args(["region", "--case", "plus", "--samples", "3"]).env("SINGFDE_THREADS", "zero").output().unwrap();
    assert_eq!(code(&o), 1);
    let o = Command::new(BIN).args(["region", "--case", "plus", "--samples", "3"]).env("SINGFDE_THREADS", "1").output().unwrap();
    assert_eq!(code(&o), 0);
}

#[test]
fn weighted_refusal_exits_two_with_citation() {
    let o = run(&["solve", "--config", &cfg("weighted_refused.cfg"), "--format", "json"]);
    assert_eq!(code(&o), 2);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["status"], "refused");
    assert!(v["criterion"].as_str().unwrap().contains("weighted gain"));
    assert!(v["citation"].as_str().unwrap().contains("strictly below |k|"));
    let o = run(&["check", "--config", &cfg("weighted_refused.cfg")]);
    assert_eq!(code(&o), 2);
}

#[test]
fn weighted_delay_converges() {
    let o = run(&["solve", "--config", &cfg("weighted_delay.cfg"), "--format", "json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["report"]["weighted_residual"].as_f64().unwrap() <= 1e-6);
    assert!((v["report"]["gain"].as_f64().unwrap() - 0.5).abs() <= 1e-9);
    assert_eq!(code(&run(&["check", "--config", &cfg("weighted_delay.cfg")])), 0);
}

#[test]
fn singular_system_exits_three() {
    let o = run(&["solve", "--config", &cfg("singular.cfg"), "--mesh", "64", "--format", "json"]);
    assert_eq!(code(&o), 3);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["status"], "not_converged");
    assert_eq!(v["path"], "Collocation");
}

#[test]
fn other_problems_solve() {
    for name in ["delay_plus.cfg", "bvp_minus.cfg"] {
        let o = run(&["solve", "--config", &cfg(name), "--mesh", "128", "--format", "json"]);
        assert_eq!(code(&o), 0, "{name}");
        assert_eq!(code(&run(&["check", "--config", &cfg(name)])), 0, "{name}");
    }
}

#[test]
fn region_rows_and_errors() {
    let o = run(&["region", "--case", "plus", "--samples", "3"]);
    assert_eq!(code(&o), 0);
    let rows = csv_rows(&stdout(&o));
    let vals: Vec<(f64, f64)> = rows.iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect();
    assert_eq!(vals, vec![(0.0, 2.0), (0.5, 2f64.sqrt()), (1.0, 0.0)]);
    assert!(rows.iter().all(|r| r[2] == "plus"));
    let o = run(&["region", "--case", "nonsingular", "--samples", "2"]);
    let vals: Vec<(f64, f64)> = csv_rows(&stdout(&o)).iter().map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap())).collect();
    assert_eq!(vals, vec![(0.0, 3.0), (1.0, 1.0)]);
    assert_eq!(code(&run(&["region", "--case", "plus", "--samples", "1"])), 1);
    assert_eq!(code(&run(&["region", "--case", "sideways", "--samples", "3"])), 1);
}

#[test]
fn sharpness_examples() {
    let o = run(&["sharpness", "--case", "plus", "--t-plus", "0", "--t-minus", "0", "--resolution", "8", "--mesh", "64"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["searched_min"], 1.0);
    assert_eq!(v["gap"], 0.0);
    let o = run(&["sharpness", "--case", "plus", "--t-plus", "0.5", "--t-minus", "1", "--resolution", "128", "--mesh", "64"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["closed_form"], 0.25);
    assert!(v["gap"].as_f64().unwrap() <= 0.02);
    assert_eq!(v["conditioning"].as_array().unwrap().len(), 3);
    let o = run(&["sharpness", "--case", "minus", "--t-plus", "2", "--t-minus", "0", "--resolution", "128", "--mesh", "64"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["searched_min"].as_f64().unwrap().abs() <= 0.02);
    assert_eq!(code(&run(&["sharpness", "--case", "plus", "--t-plus", "0", "--t-minus", "0", "--resolution", "7"])), 1);
    assert_eq!(code(&run(&["sharpness", "--case", "plus", "--t-plus", "-1", "--t-minus", "0"])), 1);
}

fn converge_rows(name: &str) -> Vec<(usize, f64, Option<f64>)> {
    let o = run(&["converge", "--config", &cfg(name), "--meshes", "64,128,256,512"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("N,error,order\n"));
    csv_rows(&text)
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap(), (!r[2].is_empty()).then(|| r[2].parse().unwrap())))
        .collect()
}

#[test]
fn converge_orders() {
    let rows = converge_rows("converge_model.cfg");
    assert_eq!(rows.len(), 4);
    assert!(rows[1..].iter().all(|r| r.2.unwrap() >= 1.9), "{rows:?}");
    // finest-mesh reference: one row fewer
    let rows = converge_rows("converge_tabulated.cfg");
    assert_eq!(rows.len(), 3);
    assert!(rows[1..].iter().all(|r| r.2.unwrap() >= 0.9), "{rows:?}");
    // t/2 is piecewise linear on every mesh
    let rows = converge_rows("model_plus.cfg");
    assert!(rows.iter().all(|r| r.1 <= 1e-14 && r.2.is_none()), "{rows:?}");
    assert_eq!(code(&run(&["converge", "--config", &cfg("model_plus.cfg"), "--meshes", "64,128"])), 1);
}

#[test]
fn outputs_are_deterministic() {
    let runs = [
        vec!["solve", "--config", "bvp_minus.cfg", "--mesh", "128"],
        vec!["solve", "--config", "weighted_delay.cfg", "--format", "json"],
        vec!["sharpness", "--case", "minus", "--t-plus", "1", "--t-minus", "0.5", "--resolution", "32", "--mesh", "64"],
        vec!["converge", "--config", "converge_tabulated.cfg"],
        vec!["check", "--config", "delay_plus.cfg"],
    ];
    for args in runs {
        let args: Vec<String> = args.iter().map(|a| if a.ends_with(".cfg") { cfg(a) } else { a.to_string() }).collect();
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let a = run(&args);
        let b = run(&args);
        assert_eq!(code(&a), 0, "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert!(!a.stdout.is_empty());
    }
}

#[test]
fn shipped_configs_round_trip() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let (c, _) = config::load(&path).unwrap();
        let printed = c.to_string();
        let (again, _) = config::parse(&printed).unwrap();
        assert_eq!(again, c, "{}", path.display());
        assert_eq!(again.to_string(), printed);
    }
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ubp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ubp")).args(args).output().expect("spawn ubp")
}

fn iris() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../datasets/iris.csv")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corrupt(dir: &Path, tag: &str, u: &str, seed: &str) -> (PathBuf, PathBuf) {
    let out = dir.join(format!("{tag}.csv"));
    let plan = dir.join(format!("{tag}.json"));
    let o = ubp(&["corrupt", "--in", s(&iris()), "--u", u, "--seed", seed, "--out", s(&out), "--plan-out", s(&plan)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    (out, plan)
}

#[test]
fn version_flag() {
    let o = ubp(&["--version"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.trim().starts_with("ubp 0."), "{text}");
}

#[test]
fn corrupt_is_deterministic_and_exact() {
    let dir = tempfile::tempdir().unwrap();
    let (a_csv, a_plan) = corrupt(dir.path(), "a", "30", "7");
    let (b_csv, b_plan) = corrupt(dir.path(), "b", "30", "7");
    assert_eq!(fs::read(&a_csv).unwrap(), fs::read(&b_csv).unwrap());
    assert_eq!(fs::read(&a_plan).unwrap(), fs::read(&b_plan).unwrap());
    let plan: serde_json::Value = serde_json::from_slice(&fs::read(&a_plan).unwrap()).unwrap();
    assert_eq!(plan["removed"].as_array().unwrap().len(), 180);
    let text = fs::read_to_string(&a_csv).unwrap();
    assert_eq!(text.matches('?').count(), 180);
}

#[test]
fn bad_sparsity_is_a_usage_error() {
    for u in ["0", "100", "-3", "abc"] {
        let o = ubp(&["corrupt", "--in", s(&iris()), "--u", u]);
        assert_eq!(o.status.code(), Some(2), "u={u}");
    }
}

#[test]
fn missing_input_is_a_runtime_error() {
    let o = ubp(&["corrupt", "--in", "/nonexistent/file.csv", "--u", "30"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_method_shows_grammar() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _) = corrupt(dir.path(), "c", "30", "1");
    for m in ["ubp:t=", "ubp:t", "nosuch", "fkm:k=2,k=3"] {
        let o = ubp(&["impute", "--in", s(&csv), "--method", m]);
        assert_eq!(o.status.code(), Some(2), "method {m}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains("name(:key=value"), "{err}");
    }
}

#[test]
fn baseline_fills_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, plan) = corrupt(dir.path(), "c", "30", "3");
    let out = dir.path().join("filled.csv");
    let o = ubp(&["impute", "--in", s(&csv), "--method", "baseline", "--out", s(&out)]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert!(!text.contains('?'));

    let o = ubp(&["evaluate", "--original", s(&iris()), "--imputed", s(&out), "--plan", s(&plan)]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let err = report["average_error"].as_f64().unwrap();
    assert!(err > 0.0 && err < 0.5, "{err}");
    assert_eq!(report["cells_scored"].as_u64(), Some(180));
}

#[test]
fn evaluate_identity_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (_, plan) = corrupt(dir.path(), "c", "30", "3");
    let o = ubp(&["evaluate", "--original", s(&iris()), "--imputed", s(&iris()), "--plan", s(&plan)]);
    assert!(o.status.success());
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["average_error"].as_f64(), Some(0.0));
}

#[test]
fn ubp_reports_progress_and_generates_a_grid() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _) = corrupt(dir.path(), "c", "30", "5");
    let out = dir.path().join("ubp.csv");
    let model = dir.path().join("model.json");
    let args = [
        "impute", "--in", s(&csv), "--method", "ubp:t=2,hidden=8", "--seed", "2", "--out", s(&out),
        "--model-out", s(&model), "--max-epochs", "50",
    ];
    let o = ubp(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let err = String::from_utf8(o.stderr).unwrap();
    let progress: Vec<&str> = err.lines().filter(|l| l.starts_with("phase=")).collect();
    assert!(!progress.is_empty());
    for l in &progress {
        let keys: Vec<&str> = l.split(' ').map(|kv| kv.split('=').next().unwrap()).collect();
        assert_eq!(keys, ["phase", "epoch", "rmse", "eta"], "{l}");
    }
    assert!(!fs::read_to_string(&out).unwrap().contains('?'));

    let again = dir.path().join("ubp2.csv");
    let mut args2 = args;
    args2[8] = s(&again);
    let model2 = dir.path().join("model2.json");
    args2[10] = s(&model2);
    assert!(ubp(&args2).status.success());
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());

    let o = ubp(&["generate", "--model", s(&model), "--steps", "3"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 9);
    assert_eq!(lines[0], "latent0,latent1,out0,out1,out2,out3");
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 6));
}

#[test]
fn model_out_needs_a_network_method() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _) = corrupt(dir.path(), "c", "30", "1");
    let model = dir.path().join("m.json");
    let o = ubp(&["impute", "--in", s(&csv), "--method", "baseline", "--model-out", s(&model)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_writes_one_row_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    let cfg = serde_json::json!({
        "datasets": [{"name": "iris", "path": s(&iris())}],
        "u_levels": [30],
        "seeds": [0],
        "grids": [{"name": "baseline", "specs": ["baseline"]}],
        "reference": "baseline"
    });
    fs::write(&config, cfg.to_string()).unwrap();
    let csv = dir.path().join("runs.csv");
    let summary = dir.path().join("summary.json");
    let curves = dir.path().join("curves.tsv");
    let run = |workers: &str, csv: &Path| {
        ubp(&[
            "sweep", "--config", s(&config), "--csv-out", s(csv), "--summary-out", s(&summary),
            "--curves-out", s(&curves), "--workers", workers,
        ])
    };
    let o = run("1", &csv);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2, "{text}");
    assert!(lines[0].starts_with("dataset,u,seed,method,spec,avg_error"));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(&summary).unwrap()).unwrap();
    assert_eq!(summary["best_of_grid"].as_array().unwrap().len(), 1);
    assert!(fs::read_to_string(&curves).unwrap().starts_with("# iris"));

    let csv2 = dir.path().join("runs2.csv");
    assert!(run("3", &csv2).status.success());
    assert_eq!(fs::read(&csv).unwrap(), fs::read(&csv2).unwrap());
}

#[test]
fn generate_rejects_one_step() {
    let o = ubp(&["generate", "--model", "m.json", "--steps", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

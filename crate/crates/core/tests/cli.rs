use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn ifsdim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ifsdim")).args(args).output().expect("spawn ifsdim")
}

fn report(args: &[&str]) -> Value {
    let out = ifsdim(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json report")
}

#[test]
fn bowen_report_matches_library() {
    let r = report(&["bowen", "--system", "gauss", "--bound", "xi", "--k", "10", "--m", "10000", "--tol", "1e-10"]);
    assert_eq!(r["schema"], "ifsdim-report/1");
    assert_eq!(r["command"], "bowen");
    assert_eq!(r["config"]["k"], 10);
    let lib = ifsdim::dimension::bowen_root(&ifsdim::families::make_gauss(), ifsdim::ifs_core::BoundKind::Xi, 10, 10_000, 1e-10)
        .unwrap();
    assert_eq!(r["result"]["s"].as_f64().unwrap(), lib.value);
    assert!(r["result"]["residual"].as_f64().unwrap().abs() < 1e-9);
    let bracket = r["result"]["bracket"].as_array().unwrap();
    assert!(bracket[0].as_f64().unwrap() <= lib.value && lib.value <= bracket[1].as_f64().unwrap());
}

#[test]
fn bowen_both_bounds() {
    let r = report(&["bowen", "--bound", "both", "--k", "5", "--m", "500"]);
    let lo = r["result"]["lower"]["s"].as_f64().unwrap();
    let hi = r["result"]["upper"]["s"].as_f64().unwrap();
    assert!(lo <= hi);
}

#[test]
fn predict_gauss_like_power() {
    let r = report(&["predict", "--d", "2", "--phi", "pow:2", "--gauss-like", "--s0", "0.5"]);
    assert!((r["result"]["hausdorff"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(r["result"]["packing"].as_f64().unwrap(), 0.5);
    let r = report(&["predict", "--d", "2", "--phi", "pow:2", "--s0", "0.2"]);
    assert!(r["result"]["hausdorff"]["lo"].is_number());
}

#[test]
fn words_count_and_list() {
    let r = report(&["words", "--phi", "lin:1", "--depth", "2", "--cap", "3", "--strict"]);
    assert_eq!(r["result"]["count"], 3);
    let r = report(&["words", "--phi", "lin:1", "--depth", "2", "--cap", "3", "--list"]);
    assert_eq!(r["result"]["words"], serde_json::json!([[1, 2], [1, 3], [2, 3]]));
    let r = report(&["words", "--phi", "lin:1", "--depth", "2", "--cap", "3", "--non-strict"]);
    assert_eq!(r["result"]["count"], 6);
}

#[test]
fn huge_counts_become_strings() {
    let r = report(&["words", "--phi", "lin:1", "--depth", "10", "--cap", "100000"]);
    assert!(r["result"]["count"].is_string());
}

#[test]
fn ladder_csv() {
    let out = ifsdim(&["ladder", "--steps", "3", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(headers.iter().collect::<Vec<_>>(), ["n", "l", "floor_phi", "ln_l", "gamma_ratio"]);
    let ls: Vec<String> = rdr.records().map(|r| r.unwrap()[1].to_string()).collect();
    assert_eq!(ls, ["9", "18", "32"]);
}

#[test]
fn cover_trend() {
    let r = report(&["cover", "--depth", "8", "--s", "0.6", "--cap", "1000", "--trend-from", "3"]);
    assert_eq!(r["result"]["trend"], "decreasing");
    let r = report(&["cover", "--depth", "8", "--s", "0.45", "--cap", "1000", "--trend-from", "3"]);
    assert_eq!(r["result"]["trend"], "increasing");
}

#[test]
fn boxdim_sources() {
    let r = report(&["boxdim", "--source", "cantor:12", "--j-min", "2", "--j-max", "18"]);
    let v = r["result"]["estimate"]["value"].as_f64().unwrap();
    assert!((v - 2f64.ln() / 3f64.ln()).abs() < 0.05);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pts.txt");
    let pts: String = (0..1024).map(|k| format!("{}\n", k as f64 / 1024.0)).collect();
    std::fs::write(&path, format!("# grid\n{pts}")).unwrap();
    let src = format!("file:{}", path.display());
    let r = report(&["boxdim", "--source", &src, "--j-min", "1", "--j-max", "10"]);
    assert!((r["result"]["estimate"]["value"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    let r = report(&["boxdim", "--source", "first-level:2000", "--system", "gauss", "--j-min", "2", "--j-max", "16"]);
    assert!((r["result"]["estimate"]["value"].as_f64().unwrap() - 0.5).abs() < 0.1);
}

#[test]
fn frostman_and_trim_policy() {
    let r = report(&["frostman", "--depth", "2"]);
    assert_eq!(r["result"]["all_pass"], true);
    let r = report(&["frostman", "--depth", "2", "--policy", "trim"]);
    assert_eq!(r["result"]["levels"][0]["below_floor"], true);
}

#[test]
fn localdim_report_and_csv() {
    let r = report(&["localdim", "--samples", "100", "--depth", "10", "--alpha", "1.5"]);
    let v = r["result"]["estimate"]["value"].as_f64().unwrap();
    assert!((v - 0.4).abs() < 0.05);
    assert!(r["result"].get("samples").is_none());
    assert!(r["result"]["normalizers"]["c3"].as_f64().unwrap() >= 1.0);
    let out = ifsdim(&["localdim", "--samples", "100", "--depth", "10", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("sample_id,n,digit,log_r_lo,log_r_hi,log_mass\n"));
    assert_eq!(text.lines().count(), 1 + 100 * 10);
}

#[test]
fn same_seed_same_bytes_different_seed_differs() {
    let a = ifsdim(&["localdim", "--samples", "50", "--depth", "8", "--seed", "1", "--traces"]).stdout;
    let b = ifsdim(&["localdim", "--samples", "50", "--depth", "8", "--seed", "1", "--traces"]).stdout;
    let c = ifsdim(&["localdim", "--samples", "50", "--depth", "8", "--seed", "2", "--traces"]).stdout;
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn timing_is_opt_in() {
    let r = report(&["predict", "--d", "3", "--phi", "lin:2", "--s0", "0"]);
    assert!(r.get("wall_time_s").is_none());
    let r = report(&["predict", "--d", "3", "--phi", "lin:2", "--s0", "0", "--timing"]);
    assert!(r["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn gapsys_save_and_reuse() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("gap.json");
    let doc_s = doc.to_str().unwrap();
    let r = report(&["gapsys", "--phi", "pow:2", "--d", "2", "--eps", "0.1", "--n-max", "2000", "--table-len", "2000", "--save", doc_s]);
    assert_eq!(r["result"]["all_pass"], true);
    let loaded = report(&["gapsys", "--load", doc_s, "--n-max", "2000"]);
    assert_eq!(loaded["result"]["c"], r["result"]["c"]);
    assert_eq!(loaded["result"]["all_pass"], true);
    let system = format!("gapsys:{doc_s}");
    let b = report(&["bowen", "--system", &system, "--k", "2", "--m", "1000"]);
    assert!(b["result"]["s"].as_f64().unwrap() > 0.0);
    let out = ifsdim(&["bowen", "--system", &system, "--k", "2", "--m", "5000"]);
    assert_eq!(out.status.code(), Some(2), "digits beyond the table are a precondition error");
}

#[test]
fn out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = ifsdim(&["predict", "--d", "2", "--phi", "lin:1", "--s0", "0", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["result"]["hausdorff"].as_f64().unwrap(), 0.5);
}

#[test]
fn exit_codes() {
    assert_eq!(ifsdim(&["bowen", "--unknown-flag"]).status.code(), Some(2));
    assert_eq!(ifsdim(&["nope"]).status.code(), Some(2));
    assert_eq!(ifsdim(&["predict", "--d", "2", "--phi", "sqrt:2", "--s0", "0"]).status.code(), Some(2));
    assert_eq!(ifsdim(&["ladder", "--eps", "0.7"]).status.code(), Some(2));
    // λ_1 = 1 for the Gauss maps, so no root bracket exists.
    assert_eq!(ifsdim(&["bowen", "--bound", "lambda", "--k", "1", "--m", "10"]).status.code(), Some(3));
    assert_eq!(ifsdim(&["predict", "--d", "2", "--phi", "lin:1", "--s0", "0", "--out", "/nonexistent-dir/x.json"]).status.code(), Some(2));
    assert_eq!(ifsdim(&["predict", "--d", "2", "--phi", "lin:1", "--s0", "0", "--format", "csv"]).status.code(), Some(0));
    assert_eq!(ifsdim(&["--help"]).status.code(), Some(0));
}

fn write_battery(dir: &Path, body: &str) -> String {
    let path = dir.join("battery.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const BATTERY: &str = r#"
[bowen_gauss]
command = "bowen --system gauss --bound xi --k 10 --m 10000"
expect_field = "result.s"
expect_value = 0.6897
expect_tol = 1e-3

[ladder_gauss]
command = "ladder --system gauss --phi lin:1 --eps 0.1 --steps 2"
expect_field = "result.values.1"
expect_value = 18

[predict_power]
command = "predict --d 2 --phi pow:2 --gauss-like --s0 0.5"
expect_field = "result.hausdorff"
expect_value = 0.3333333333333333
expect_tol = 1e-12
"#;

#[test]
fn battery_passes_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_battery(dir.path(), BATTERY);
    let out_dir = dir.path().join("out");
    let out = ifsdim(&["battery", &cfg, "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.starts_with("name,command,field,expected,tol,actual,pass,error\n"));
    for name in ["bowen_gauss", "ladder_gauss", "predict_power"] {
        assert!(out_dir.join(format!("{name}.json")).exists());
    }
}

#[test]
fn battery_fails_on_perturbed_expectation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_battery(dir.path(), &BATTERY.replace("expect_value = 18", "expect_value = 19"));
    let out_dir = dir.path().join("out");
    let out = ifsdim(&["battery", &cfg, "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["passed"], 2);
}

#[test]
fn empty_battery_is_trivial_pass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_battery(dir.path(), "");
    let out_dir = dir.path().join("out");
    let out = ifsdim(&["battery", &cfg, "--out-dir", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let summary = std::fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1);
}

#[test]
fn malformed_battery_is_precondition_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_battery(dir.path(), "[x]\nexpect_value = 1\n");
    assert_eq!(ifsdim(&["battery", &cfg, "--out-dir", dir.path().to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn shipped_battery_passes() {
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../experiments/acceptance.toml");
    let dir = tempfile::tempdir().unwrap();
    let out = ifsdim(&["battery", cfg, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

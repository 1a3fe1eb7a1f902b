use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_oobforest"));
    c.env_remove("OOBFOREST_OUT").env_remove("OOBFOREST_JOBS");
    c
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().unwrap()
}

fn titanic() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/titanic.csv").to_string()
}

/// Small two-feature file: `x` decides the label, `noise` does not.
fn toy_csv(dir: &Path) -> PathBuf {
    let mut s = String::from("x,noise,y\n");
    for i in 0..60 {
        let x = i % 10;
        let y = u8::from(x >= 5);
        s.push_str(&format!("{x},{},{y}\n", (i * 7) % 13));
    }
    let path = dir.join("toy.csv");
    fs::write(&path, s).unwrap();
    path
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = match fs::read_dir(dir) {
        Ok(rd) => rd.map(|e| e.unwrap().file_name().into_string().unwrap()).collect(),
        Err(_) => Vec::new(),
    };
    v.sort();
    v
}

#[test]
fn importance_writes_one_report_per_method_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let data = titanic();
    let args = [
        "importance", "--data", &data, "--methods", "mdi,mda,pg:0.5:1", "--trees", "20", "--mtry", "2", "--seed", "7",
    ];
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run(&args, &a).status.success());
    assert!(run(&args, &b).status.success());
    let names = files(&a);
    assert_eq!(names, ["importance_mda_7.csv", "importance_mdi_7.csv", "importance_pg-0.5-1_7.csv"]);
    for n in &names {
        assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n} differs");
    }
    let text = fs::read_to_string(a.join("importance_mdi_7.csv")).unwrap();
    assert!(text.contains("# seed: 7\n"));
    assert!(text.contains("# config_sha256: "));
    assert!(text.contains("\"methods\":[\"mdi\",\"mda\",\"pg:0.5:1\"]"));
    assert!(text.contains("feature,method,score\nPassengerId,mdi,"));
}

#[test]
fn json_format_and_explicit_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = toy_csv(tmp.path());
    let out = tmp.path().join("o");
    let o = run(
        &["importance", "--data", csv.to_str().unwrap(), "--label", "y", "--methods", "mdi", "--trees", "5", "--format", "json"],
        &out,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("importance_mdi_0.json")).unwrap()).unwrap();
    assert_eq!(doc["meta"]["seed"], 0);
    assert_eq!(doc["report"]["feature_names"], serde_json::json!(["x", "noise"]));
    let s = doc["report"]["scores"].as_array().unwrap();
    assert!(s[0].as_f64().unwrap() > s[1].as_f64().unwrap());
}

#[test]
fn unknown_method_is_rejected_before_any_work() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = run(&["importance", "--data", "/does/not/exist.csv", "--methods", "mdi,foo"], &out);
    // a data error would be 3: the method list is checked first
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("foo"));
    assert!(files(&out).is_empty());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    assert_eq!(run(&["explain", "--kind", "cfc"], out).status.code(), Some(2));
    assert_eq!(run(&["simulate", "bogus"], out).status.code(), Some(2));
    assert_eq!(run(&["importance", "--data", "/does/not/exist.csv", "--methods", "mdi"], out).status.code(), Some(3));
    let csv = toy_csv(tmp.path());
    let o = run(&["importance", "--data", csv.to_str().unwrap(), "--label", "y", "--methods", "mdi", "--mtry", "5"], out);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numeric_failure_removes_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = toy_csv(tmp.path());
    let out = tmp.path().join("o");
    // without OOB rows the OOB cover is empty; `mdi` is written first
    let o = run(
        &[
            "importance", "--data", csv.to_str().unwrap(), "--label", "y", "--methods", "mdi,shap:oob", "--trees", "3",
            "--subsample", "1.0",
        ],
        &out,
    );
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(files(&out).is_empty(), "left behind: {:?}", files(&out));
}

#[test]
fn explain_verify_reproduces_predictions() {
    let tmp = tempfile::tempdir().unwrap();
    let data = titanic();
    for kind in ["cfc", "shap"] {
        let out = tmp.path().join(kind);
        let o = run(&["explain", "--data", &data, "--kind", kind, "--trees", "10", "--verify"], &out);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let pred = fs::read_to_string(out.join(format!("predictions_{kind}_inbag_0.csv"))).unwrap();
        let mut rows = 0;
        for line in pred.lines().filter(|l| !l.starts_with('#')).skip(1) {
            let v: Vec<f64> = line.split(',').skip(1).map(|t| t.parse().unwrap()).collect();
            assert!((v[0] - v[2]).abs() < 1e-9, "{line}");
            rows += 1;
        }
        assert_eq!(rows, 714);
    }
}

#[test]
fn explain_weighted_oob_shap() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = run(
        &["explain", "--data", &titanic(), "--kind", "shap", "--cover", "oob", "--weighted", "--trees", "10"],
        &out,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(files(&out), ["attributions_shap_oob_0.csv", "importance_wshap-oob-all_0.csv"]);
    let o = run(&["explain", "--data", &titanic(), "--kind", "cfc", "--weighted"], &out);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_splitbias_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let args = ["simulate", "splitbias", "--sizes", "10,50", "--reps", "2000", "--seed", "3"];
    assert!(run(&args, &a).status.success());
    assert!(run(&args, &b).status.success());
    assert_eq!(files(&a), ["splitbias_3.csv", "splitbias_3.json"]);
    let csv = fs::read_to_string(a.join("splitbias_3.csv")).unwrap();
    assert_eq!(csv, fs::read_to_string(b.join("splitbias_3.csv")).unwrap());
    assert!(csv.contains("# study: splitbias\n# seed: 3\n"));
    assert!(csv.contains("rep,method,feature,score\n0,uncorrected_mean,N10,"));
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("env_out");
    let o = bin()
        .args(["simulate", "null", "--reps", "2", "--trees", "5", "--seed", "1"])
        .env("OOBFOREST_OUT", &out)
        .env("OOBFOREST_JOBS", "1")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(files(&out), ["null_1.csv", "null_1.json"]);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("null_1.json")).unwrap()).unwrap();
    assert_eq!(doc["meta"]["config"]["reps"], 2);
    assert!(doc["summary"]["mdi"]["X5"]["median"].is_number());
}

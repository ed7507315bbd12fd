use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn heim(args: &[&str]) -> Output {
    heim_env(args, &[])
}

fn heim_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_heim"));
    cmd.args(args).current_dir(root()).env_remove("HEIM_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn heim")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert_eq!(code(o), 0, "{}", stderr(o));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn assert_schema(name: &str, v: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema").join(name);
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator
        .iter_errors(v)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

const SMALL_SIM: [&str; 4] = ["--instances", "3", "--trials", "4"];

#[test]
fn optimize_kg_spec() {
    let o = heim(&[
        "optimize",
        "--spec",
        "specs/knowledge_graph.heim",
        "--hw",
        "specs/rram_2bpc.hw",
    ]);
    let v = json(&o);
    assert_schema("optimize.schema.json", &v);

    let spec =
        heim_core::parse_spec(&std::fs::read_to_string(root().join("specs/knowledge_graph.heim")).unwrap()).unwrap();
    let hw = heim_core::parse_hw_model(&std::fs::read_to_string(root().join("specs/rram_2bpc.hw")).unwrap()).unwrap();
    let lib = heim_core::optimize(&hw, &spec, heim_core::DEFAULT_MAX_N).unwrap();
    assert_eq!(v["n_opt"].as_u64().unwrap() as usize, lib.n_opt);

    let by_size = v["queries"][0]["by_size"].as_array().unwrap();
    assert_eq!(by_size.len(), 4);
    let thr: Vec<f64> = by_size.iter().rev().map(|s| s["threshold"].as_f64().unwrap()).collect();
    for (got, want) in thr.iter().zip([0.4119, 0.3794, 0.3794, 0.1744]) {
        assert!((got - want).abs() <= 0.005, "{thr:?}");
    }
}

#[test]
fn optimize_csv_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("opt.csv");
    let o = heim(&[
        "optimize",
        "--spec",
        "specs/knowledge_graph.heim",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("id,requirement,n,threshold,fp,fn,acc,independence\n"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn malformed_spec_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.heim");
    std::fs::write(&bad, "spec {\n  codebook a(2);\n  require-accuracy(a, \n").unwrap();
    let o = heim(&["optimize", "--spec", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let msg = stderr(&o);
    assert!(msg.contains("4:1:") || msg.contains("3:"), "{msg}");
    let o = heim(&["optimize", "--spec", "no/such/file.heim"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn tiny_max_n_is_infeasible() {
    let o = heim(&["optimize", "--spec", "specs/knowledge_graph.heim", "--max-n", "8"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("dimensional constraints"), "{}", stderr(&o));
}

#[test]
fn simulate_is_deterministic_and_valid() {
    let args = [&["simulate", "--benchmark", "set", "--seed", "7"][..], &SMALL_SIM[..]].concat();
    let a = heim(&args);
    let b = heim(&args);
    assert_eq!(stdout(&a), stdout(&b));
    let v = json(&a);
    assert_schema("simulate.schema.json", &v);
    assert!(v["results"][0]["wall_ms"].is_null());
    assert_eq!(v["results"][0]["result"]["seed"], 7);

    let other = heim(&[&["simulate", "--benchmark", "set", "--seed", "8"][..], &SMALL_SIM[..]].concat());
    assert_ne!(stdout(&a), stdout(&other));
}

#[test]
fn simulate_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("run");
    let args = [
        &[
            "simulate",
            "--benchmark",
            "db-match",
            "--bpc",
            "2",
            "--timing",
            "--out",
            prefix.to_str().unwrap(),
        ][..],
        &SMALL_SIM[..],
    ]
    .concat();
    let o = heim(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(prefix.with_extension("csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(
        header.starts_with("benchmark,knob,lo,hi,inject_p,query_p,n,thr"),
        "{header}"
    );
    let v: Value = serde_json::from_str(&std::fs::read_to_string(prefix.with_extension("json")).unwrap()).unwrap();
    assert_schema("simulate.schema.json", &v);
    assert_eq!(v["results"][0]["result"]["inject_p"], 0.0215);
    assert!(v["results"][0]["wall_ms"].as_f64().unwrap() > 0.0);
}

#[test]
fn unknown_benchmark_is_an_input_error() {
    let o = heim(&["simulate", "--benchmark", "bloom"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("bloom"));
    let o = heim(&["simulate", "--benchmark", "set", "--bpc", "4"]);
    assert_eq!(code(&o), 1);
    let o = heim(&["simulate", "--benchmark", "set", "--inject-p", "0.7"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn nfa_reports_each_query_length() {
    let o = heim(&[
        "simulate",
        "--benchmark",
        "nfa",
        "--qs-len",
        "8",
        "--instances",
        "8",
        "--trials",
        "3",
        "--format",
        "csv",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    // summary row, then one row per query length
    assert_eq!(rows.len(), 9);
    let lengths: Vec<&str> = rows[1..].iter().map(|r| &r[2]).collect();
    assert_eq!(lengths, ["1", "2", "3", "4", "5", "6", "7", "8"]);
}

#[test]
fn check_verdicts_and_exit_codes() {
    let o = heim(&["check", "--expr", "a*c + b*c + a*b"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains(": dependent"));

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("exprs.txt");
    std::fs::write(&file, "# tuples\n(a+b)*(c+d)\nq\n").unwrap();
    let o = heim(&["check", file.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o), "(a+b)*(c+d): independent product\nq: independent\n");

    std::fs::write(&file, "a\n(a + \n").unwrap();
    let o = heim(&["check", file.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    assert_eq!(code(&heim(&["check"])), 1);
}

#[test]
fn compare_is_deterministic_in_accuracy() {
    let args = [
        "compare",
        "--benchmark",
        "set",
        "--trials",
        "1",
        "--instances",
        "1",
        "--grid",
        "50",
    ];
    let strip = |v: Value| -> Vec<(f64, f64, f64)> {
        v.as_array()
            .unwrap()
            .iter()
            .map(|r| {
                (
                    r["heim_accuracy"].as_f64().unwrap(),
                    r["baseline_accuracy"].as_f64().unwrap(),
                    r["baseline_thr"].as_f64().unwrap(),
                )
            })
            .collect()
    };
    let a = json(&heim(&args));
    assert_schema("compare.schema.json", &a);
    let b = json(&heim(&args));
    assert_eq!(strip(a), strip(b));
}

#[test]
fn heim_threads_is_honored() {
    let args = [&["simulate", "--benchmark", "graph", "--bpc", "3"][..], &SMALL_SIM[..]].concat();
    let one = heim_env(&args, &[("HEIM_THREADS", "1")]);
    let four = heim_env(&args, &[("HEIM_THREADS", "4")]);
    assert_eq!(code(&one), 0, "{}", stderr(&one));
    assert_eq!(stdout(&one), stdout(&four));
    let bad = heim_env(&args, &[("HEIM_THREADS", "zero")]);
    assert_eq!(code(&bad), 1);
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&heim(&["--help"])), 0);
    assert_eq!(code(&heim(&["--version"])), 0);
    assert_eq!(code(&heim(&["frobnicate"])), 1);
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn diffvp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diffvp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn repo(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
        .to_str()
        .unwrap()
        .to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn json(o: &Output) -> Value {
    serde_json::from_str(&stdout(o)).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

#[test]
fn parse_prints_the_ast() {
    let o = diffvp(&["parse", &repo("programs/compare_colors.vp")]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&o)["statements"].as_array().unwrap().len(), 8);
}

#[test]
fn parse_reports_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let seg = write(dir.path(), "seg.vp", "A=SEG(image=IMAGE)\nR=RESULT(var=A)\n");
    let o = diffvp(&["parse", &seg]);
    assert_eq!(code(&o), 1);
    assert!(
        stderr(&o).contains("UnknownModule") && stderr(&o).contains("line 1"),
        "{}",
        stderr(&o)
    );
    let empty = write(dir.path(), "empty.vp", "");
    let o = diffvp(&["parse", &empty]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("MissingResult"));
    let o = diffvp(&["parse", "/nonexistent/program.vp"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("/nonexistent/program.vp"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&diffvp(&["parse", "--bogus", "x"])), 1);
    assert_eq!(
        code(&diffvp(&[
            "graph",
            &repo("programs/compare_colors.vp"),
            "--hide-deterministic"
        ])),
        1
    );
    assert_eq!(code(&diffvp(&["infer", "--fixture", "mixture", "--index", "1"])), 1);
    assert_eq!(code(&diffvp(&["infer"])), 1);
    assert_eq!(code(&diffvp(&["--help"])), 0);
}

#[test]
fn dot_output_is_stable_and_condensable() {
    let prog = repo("programs/compare_colors.vp");
    let full = stdout(&diffvp(&["graph", &prog, "--dot"]));
    assert_eq!(full, stdout(&diffvp(&["graph", &prog, "--dot"])));
    for class in ["lightblue", "palegreen", "lightcoral"] {
        assert!(full.contains(class));
    }
    assert!(full.contains("label=\"IMAGE0\""));
    let condensed = stdout(&diffvp(&["graph", &prog, "--dot", "--hide-deterministic"]));
    assert!(!condensed.contains("label=\"IMAGE0\""));
    assert!(condensed.contains("label=\"ANSWER0\""));
}

fn probs(v: &Value) -> Vec<(String, f64)> {
    let s = v["support"].as_array().unwrap();
    let p = v["probs"].as_array().unwrap();
    s.iter()
        .zip(p)
        .map(|(s, p)| (s.to_string(), p.as_f64().unwrap()))
        .collect()
}

#[test]
fn mixture_fixture_gives_hand_computed_answer() {
    let o = diffvp(&["infer", "--fixture", "mixture"]);
    assert_eq!(code(&o), 0);
    let p = probs(&json(&o));
    assert_eq!(p.len(), 2);
    assert_eq!(p[0].0, "\"yes\"");
    assert!((p[0].1 - 0.62).abs() < 1e-12 && (p[1].1 - 0.38).abs() < 1e-12);
}

#[test]
fn shared_fixture_reports_divergence() {
    let o = diffvp(&["infer", "--fixture", "shared", "--mode", "factorized"]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("warning"));
    let v = json(&o);
    assert!((probs(&v)[0].1 - 0.25).abs() < 1e-12);
    assert!((probs(&v["divergence"]["other"])[0].1 - 0.5).abs() < 1e-12);
}

fn generate(dir: &Path, name: &str, n: &str, seed: &str) -> String {
    let out = dir.join(name).to_str().unwrap().to_string();
    let o = diffvp(&["gen", "--cases", n, "--seed", seed, "--out", &out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}

#[test]
fn gen_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let a = fs::read_to_string(generate(dir.path(), "a.jsonl", "40", "3")).unwrap();
    let b = fs::read_to_string(generate(dir.path(), "b.jsonl", "40", "3")).unwrap();
    let c = fs::read_to_string(generate(dir.path(), "c.jsonl", "40", "4")).unwrap();
    assert_eq!(a.lines().count(), 40);
    assert_eq!(a, b);
    assert_ne!(a, c);

    let out = dir.path().join("staged.jsonl");
    let o = diffvp(&[
        "gen",
        "--stages",
        "3,0,2",
        "--long",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out).unwrap().lines().count(), 6);
}

#[test]
fn one_hot_modules_agree_across_modes() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d.jsonl", "12", "5");
    for index in ["0", "7", "11"] {
        let runs: Vec<Vec<(String, f64)>> = ["argmax", "factorized", "exact", "brute"]
            .iter()
            .map(|m| {
                let o = diffvp(&["infer", &data, "--index", index, "--modules", "truth", "--mode", m]);
                assert_eq!(code(&o), 0, "{}", stderr(&o));
                // Modes may differ in which zero-mass values they list.
                probs(&json(&o)).into_iter().filter(|(_, p)| *p > 0.0).collect()
            })
            .collect();
        assert!(runs.windows(2).all(|w| w[0] == w[1]), "{runs:?}");
    }
}

#[test]
fn disrupt_full_fraction_changes_every_program() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d.jsonl", "10", "6");
    let out = dir.path().join("x.jsonl");
    let o = diffvp(&[
        "disrupt",
        "--data",
        &data,
        "--out",
        out.to_str().unwrap(),
        "--fraction",
        "1",
    ]);
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("disrupted 10 of 10"), "{}", stderr(&o));
    assert_eq!(
        code(&diffvp(&["disrupt", "--data", &data, "--out", "y", "--fraction", "2"])),
        1
    );
}

#[test]
fn checks_pass_and_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("oracle.json");
    let o = diffvp(&["oracle-check", "--cases", "30", "--report", report.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("max |exact - brute| = "));
    let r: Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert!(r["max_abs_diff"].as_f64().unwrap() < 1e-9);

    let o = diffvp(&["gradcheck", "--cases", "5"]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn failed_checks_exit_with_two() {
    // A huge finite-difference step cannot match the analytic gradient.
    let o = diffvp(&["gradcheck", "--cases", "5", "--epsilon", "2"]);
    assert_eq!(code(&o), 2, "{}{}", stdout(&o), stderr(&o));
}

fn small_config(dir: &Path) -> String {
    write(
        dir,
        "small.toml",
        "[data]\ntrain_cases = 60\neval_cases = 20\n\n[train]\nepochs_per_stage = 1\n",
    )
}

fn run_dir(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[test]
fn train_writes_reproducible_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let (a, b) = (run_dir(dir.path(), "a"), run_dir(dir.path(), "b"));
    for out in [&a, &b] {
        let o = diffvp(&[
            "train",
            "--config",
            &config,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "9",
            "--jobs",
            "2",
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let csv = fs::read(a.join("metrics.csv")).unwrap();
    assert_eq!(csv, fs::read(b.join("metrics.csv")).unwrap());
    assert!(String::from_utf8_lossy(&csv)
        .starts_with("epoch,stage,loss,acc_final,acc_loc,acc_vqa,err_program,err_module,err_other,seconds\n"));
    assert_eq!(
        fs::read(a.join("params.json")).unwrap(),
        fs::read(b.join("params.json")).unwrap()
    );
    for k in 1..=4 {
        assert!(a.join(format!("stage-{k}.json")).exists());
    }

    let data = generate(dir.path(), "eval.jsonl", "15", "1");
    let o = diffvp(&[
        "eval",
        "--data",
        &data,
        "--params",
        a.join("params.json").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&o)["cases"], 15);
}

#[test]
fn train_runs_one_directory_per_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out = run_dir(dir.path(), "sweep");
    let o = diffvp(&[
        "train",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--fractions",
        "0,0.2,0.5",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["0", "0.2", "0.5"] {
        assert!(out.join(format!("disrupt-{f}/metrics.csv")).exists());
    }
}

#[test]
fn bad_configs_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let typo = write(dir.path(), "typo.toml", "[train]\nbatch = 4\n");
    let o = diffvp(&["train", "--config", &typo]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("batch"), "{}", stderr(&o));
    let invalid = write(dir.path(), "invalid.toml", "[train]\nbatch_size = 0\n");
    let o = diffvp(&["train", "--config", &invalid]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("batch_size"), "{}", stderr(&o));
    assert_eq!(code(&diffvp(&["train", "--config", "/nonexistent.toml"])), 1);
}

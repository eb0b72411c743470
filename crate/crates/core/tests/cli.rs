mod common;

use std::path::Path;
use std::process::{Command, Output};

fn pairlink(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pairlink")).args(args).output().expect("spawn pairlink")
}

fn ok(args: &[&str]) -> Output {
    let out = pairlink(args);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{args:?}\nstderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn run_then_staged_chain_gives_the_same_report() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = common::fixture_dir();
    let run_out = dir.path().join("run");
    let out = ok(&["run", "--input-dir", s(&fixtures), "--out", s(&run_out), "--partitions", "2"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("validation"));

    let ingest = dir.path().join("ingest");
    let prep = dir.path().join("prep");
    let split = dir.path().join("split");
    ok(&["ingest", "--dir", s(&fixtures), "--out", s(&ingest)]);
    assert!(ingest.join("corpus.manifest").is_file());
    ok(&["preprocess", "--input", s(&ingest.join("corpus.csv")), "--out", s(&prep)]);
    assert_eq!(read(&prep.join("preprocess.report")), read(&run_out.join("preprocess.report")));
    ok(&["sample", "--input", s(&prep.join("features.csv")), "--out", s(&split), "--partitions", "3"]);
    assert_eq!(read(&split.join("split.manifest")), read(&run_out.join("split.manifest")));
    let mut models = Vec::new();
    for loss in ["logistic", "hinge"] {
        let model = split.join(format!("model_{loss}.txt"));
        ok(&["train", "--input", s(&split.join("train.csv")), "--loss", loss, "--out", s(&model)]);
        assert_eq!(read(&model), read(&run_out.join(format!("model_{loss}.txt"))));
        models.push(model);
    }
    let report = dir.path().join("report.csv");
    let eval = pairlink(&[
        "evaluate",
        "--model",
        s(&models[0]),
        "--model",
        s(&models[1]),
        "--out",
        s(&report),
        "--table",
    ]);
    assert!(matches!(eval.status.code(), Some(0 | 2)));
    assert_eq!(read(&report), read(&run_out.join("report.csv")));
    assert_eq!(read(&report.with_extension("txt")), read(&run_out.join("report.txt")));
}

#[test]
fn evaluate_single_split_and_holdout() {
    let dir = tempfile::tempdir().unwrap();
    let fixtures = common::fixture_dir();
    let run_out = dir.path().join("run");
    ok(&["run", "--input-dir", s(&fixtures), "--out", s(&run_out)]);

    let hold = dir.path().join("hold");
    ok(&["preprocess", "--input", s(&fixtures.join("block_1.csv")), "--out", s(&hold)]);
    ok(&["sample", "--input", s(&hold.join("features.csv")), "--holdout", "0.25", "--out", s(&hold)]);
    let manifest = read(&hold.join("split.manifest"));
    assert!(manifest.contains("holdout_fraction"));
    assert!(hold.join("train.csv").is_file() && hold.join("test.csv").is_file());
    assert!(!hold.join("validation.csv").exists());

    let out = ok(&[
        "evaluate",
        "--model",
        s(&run_out.join("model_hinge.txt")),
        "--input",
        s(&hold.join("test.csv")),
        "--split",
        "test",
    ]);
    let table = String::from_utf8_lossy(&out.stdout);
    assert_eq!(table.lines().count(), 2, "{table}");
    assert!(table.contains("hinge") && table.contains("test"));
}

#[test]
fn pairgen_reproduces_bundled_patterns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("patterns.csv");
    ok(&["pairgen", "--input", s(&common::fixture_dir().join("raw_persons.csv")), "--out", s(&out)]);
    let parse = |text: &str, skip_label: bool| -> std::collections::HashMap<(u64, u64), Vec<Option<f64>>> {
        text.lines()
            .skip(1)
            .map(|l| {
                let mut cells: Vec<&str> = l.split(',').collect();
                if skip_label {
                    cells.pop();
                }
                let id = |c: &str| c.trim_matches('"').parse::<u64>().unwrap();
                let scores = cells[2..].iter().map(|c| c.parse::<f64>().ok()).collect();
                ((id(cells[0]), id(cells[1])), scores)
            })
            .collect()
    };
    let generated = parse(&read(&out), false);
    let bundled = parse(&read(&common::fixture_dir().join("block_1.csv")), true);
    assert!(generated.len() >= bundled.len());
    for (pair, want) in &bundled {
        let got = generated.get(pair).unwrap_or_else(|| panic!("{pair:?} not generated"));
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            match (g, w) {
                (Some(g), Some(w)) => assert!((g - w).abs() < 1e-9, "{pair:?}: {g} vs {w}"),
                (None, None) => {}
                _ => panic!("{pair:?}: missingness differs"),
            }
        }
    }
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        format!("input-dir = {}\nseed = 5\nlogistic.epochs = 20\n", s(&common::fixture_dir())),
    )
    .unwrap();
    let out = dir.path().join("out");
    let res = pairlink(&["run", "--config", s(&cfg), "--out", s(&out), "--set", "hinge.epochs=10", "--seed", "9"]);
    assert!(matches!(res.status.code(), Some(0 | 2)), "{}", String::from_utf8_lossy(&res.stderr));
    let effective = read(&out.join("effective.config"));
    for want in ["seed=9", "logistic.epochs=20", "hinge.epochs=10"] {
        assert!(effective.lines().any(|l| l == want), "{want} missing from\n{effective}");
    }
}

#[test]
fn errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent");
    for args in [
        vec!["run", "--input-dir", s(&missing)],
        vec!["run", "--input-dir", s(dir.path()), "--set", "neg-fraction=1.5"],
        vec!["run", "--input-dir", s(dir.path()), "--set", "bogus"],
        vec!["run", "--input-dir", s(dir.path()), "--set", "no-such-key=1"],
        vec!["ingest", "--dir", s(dir.path()), "--out", s(dir.path())],
        vec!["train", "--input", s(&missing), "--out", s(&missing)],
    ] {
        let res = pairlink(&args);
        assert_eq!(res.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&res.stderr).starts_with("error:"), "{args:?}");
    }
    let err = String::from_utf8_lossy(&pairlink(&["run", "--set", "no-such-key=1"]).stderr).to_string();
    assert!(err.contains("no-such-key"), "{err}");
}

//! The binary's subcommands, exit codes and file contracts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

const BIN: &str = env!("CARGO_BIN_EXE_kanodrift");
const REFERENCE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/reference_coefficients.csv");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn digest(path: &Path) -> String {
    Sha256::digest(std::fs::read(path).unwrap())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn small_spec(dir: &Path, n: usize) -> PathBuf {
    write(
        dir,
        "spec.json",
        &format!(
            r#"{{"n_reviews": {n}, "seed": 3, "cutpoints": [-1, 0, 0.5, 1.5],
               "affordances": [
                 {{"action": "read", "receiver": "book", "alpha": -1.0, "beta": 1.0, "p_low": 0.3, "p_high": 0.3}},
                 {{"action": "charge", "alpha": -0.8, "beta": 0.0, "p_low": 0.3, "p_high": 0.3}}
               ]}}"#
        ),
    )
}

#[test]
fn simulate_demo_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = run(d, &["simulate", "--output-dir", "a"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).trim().ends_with("manifest.json"));
    assert_eq!(code(&run(d, &["simulate", "--output-dir", "b"])), 0);
    assert_eq!(code(&run(d, &["simulate", "--output-dir", "c", "--seed", "99"])), 0);
    for f in ["reviews.jsonl", "corpus.conllu", "manifest.json"] {
        assert_eq!(digest(&d.join("a").join(f)), digest(&d.join("b").join(f)), "{f}");
        assert_ne!(digest(&d.join("a").join(f)), digest(&d.join("c").join(f)), "{f}");
    }
    let keys = |p: &str| -> Vec<String> {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join(p)).unwrap()).unwrap();
        v.as_object().unwrap().keys().cloned().collect()
    };
    assert_eq!(keys("a/manifest.json"), keys("c/manifest.json"));
}

#[test]
fn simulate_rejects_bad_spec_with_field_name() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write(
        dir.path(),
        "bad.json",
        r#"{"n_reviews": 5, "seed": 1, "cutpoints": [1, 0, 2, 3], "affordances": []}"#,
    );
    let o = run(dir.path(), &["simulate", "--spec", spec.to_str().unwrap(), "--output-dir", "out"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("cutpoints"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn extract_counts_match_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = small_spec(d, 300);
    assert_eq!(code(&run(d, &["simulate", "--spec", spec.to_str().unwrap(), "--output-dir", "corpus"])), 0);
    let o = run(
        d,
        &[
            "extract",
            "--reviews",
            "corpus/reviews.jsonl",
            "--conllu",
            "corpus/corpus.conllu",
            "--output-dir",
            "out",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stats: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("corpus/manifest.json")).unwrap()).unwrap();
    let planted: usize = manifest["affordances"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["planted_mentions"].as_array().unwrap().len())
        .sum();
    assert_eq!(stats["reviews_selected"], 300);
    assert_eq!(stats["mentions_extracted"], planted);
    assert_eq!(stats["keys_over_threshold"], 2);
    let lines = std::fs::read_to_string(d.join("out/mentions.jsonl")).unwrap().lines().count();
    assert_eq!(lines, planted);
}

#[test]
fn extract_empty_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "r.jsonl", "");
    write(d, "c.conllu", "");
    let o = run(d, &["extract", "--reviews", "r.jsonl", "--conllu", "c.conllu", "--output-dir", "out"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stats: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stats["mentions_extracted"], 0);
    assert_eq!(stats["reviews_selected"], 0);
    assert_eq!(std::fs::read_to_string(d.join("out/mentions.jsonl")).unwrap(), "");
}

#[test]
fn missing_lexicon_dir_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "r.jsonl", "");
    write(d, "c.conllu", "");
    let o = run(
        d,
        &["extract", "--reviews", "r.jsonl", "--conllu", "c.conllu", "--lexicon-dir", "nope", "--output-dir", "out"],
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("lexicon directory not found"), "{}", stderr(&o));
}

#[test]
fn config_file_drives_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = small_spec(d, 2000);
    assert_eq!(code(&run(d, &["simulate", "--spec", spec.to_str().unwrap(), "--output-dir", "corpus"])), 0);
    write(
        d,
        "cfg.toml",
        "reviews = \"corpus/reviews.jsonl\"\nconllu = \"corpus/corpus.conllu\"\noutput_dir = \"out\"\n\n\
         [[windows]]\nlabel = \"early\"\nstart = \"2012-01-01\"\nend = \"2012-07-01\"\n\n\
         [[windows]]\nlabel = \"late\"\nstart = \"2012-07-01\"\nend = \"2013-01-01\"\n",
    );
    for cmd in ["extract", "analyze", "compare"] {
        let o = run(d, &[cmd, "--config", "cfg.toml"]);
        assert_eq!(code(&o), 0, "{cmd}: {}", stderr(&o));
    }
    let index: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("out/analysis_index.json")).unwrap()).unwrap();
    assert_eq!(index["windows"].as_array().unwrap().len(), 2);
    for w in ["early", "late"] {
        for f in ["categorization.csv", "fit_report.csv", "fit.json", "design.csv", "kano.svg"] {
            assert!(d.join("out").join(w).join(f).is_file(), "{w}/{f}");
        }
    }
    let report = std::fs::read_to_string(d.join("out/early/fit_report.csv")).unwrap();
    assert!(report.starts_with("affordance,pole_labels,alpha,alpha_se,alpha_sig,beta,beta_se,beta_sig"));
    assert!(d.join("out/transitions.csv").is_file() && d.join("out/compare.svg").is_file());
    // nothing escapes the output directory
    let mut top: Vec<String> = std::fs::read_dir(d)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    top.sort();
    assert_eq!(top, ["cfg.toml", "corpus", "out", "spec.json"]);
}

#[test]
fn non_convergence_exits_3_with_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = small_spec(d, 500);
    assert_eq!(code(&run(d, &["simulate", "--spec", spec.to_str().unwrap(), "--output-dir", "corpus"])), 0);
    write(
        d,
        "cfg.json",
        r#"{"reviews": "corpus/reviews.jsonl", "conllu": "corpus/corpus.conllu", "output_dir": "out", "max_iterations": 1}"#,
    );
    assert_eq!(code(&run(d, &["extract", "--config", "cfg.json"])), 0);
    let o = run(d, &["analyze", "--config", "cfg.json"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("out/synth/fit.json")).unwrap()).unwrap();
    assert_eq!(fit["header"]["converged"], false);
}

#[test]
fn window_without_keys_is_empty_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = small_spec(d, 200);
    assert_eq!(code(&run(d, &["simulate", "--spec", spec.to_str().unwrap(), "--output-dir", "corpus"])), 0);
    let args = ["--reviews", "corpus/reviews.jsonl", "--output-dir", "out", "--min-reviews", "100000"];
    let mut extract = vec!["extract", "--conllu", "corpus/corpus.conllu"];
    extract.extend(args);
    assert_eq!(code(&run(d, &extract)), 0);
    let mut analyze = vec!["analyze"];
    analyze.extend(args);
    let o = run(d, &analyze);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(
        std::fs::read_to_string(d.join("out/synth/categorization.csv")).unwrap(),
        "affordance,poles,alpha,beta,K,M,kano\n"
    );
}

#[test]
fn reference_table_bypass_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = run(d, &["analyze", "--from-coefficients", REFERENCE, "--output-dir", "out"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(d, &["compare", "--output-dir", "out", "--windows", "KP2", "KP3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(d.join("out/transitions.csv")).unwrap();
    assert_eq!(csv.lines().count(), 31);
    assert!(csv.lines().any(|l| l.starts_with("upgrade kindle,KP2,KP3,I,R,")), "{csv}");
}

#[test]
fn compare_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let table = |name: &str, rows: &str| write(d, name, &format!("window,affordance,alpha,beta\n{rows}"));

    let one = table("one.csv", "A,read,-1,1\n");
    assert_eq!(code(&run(d, &["analyze", "--from-coefficients", one.to_str().unwrap(), "--output-dir", "o1"])), 0);
    let o = run(d, &["compare", "--output-dir", "o1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("at least 2"), "{}", stderr(&o));

    let same = table("same.csv", "A,read,-1,1\nA,turn,0.2,-0.4\nB,read,-1,1\nB,turn,0.2,-0.4\n");
    assert_eq!(code(&run(d, &["analyze", "--from-coefficients", same.to_str().unwrap(), "--output-dir", "o2"])), 0);
    assert_eq!(code(&run(d, &["compare", "--output-dir", "o2"])), 0);
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("o2/transitions.json")).unwrap()).unwrap();
    for t in rep["common"].as_array().unwrap() {
        assert_eq!(t["cat_a"], t["cat_b"]);
        assert_eq!((t["delta_k"].as_f64(), t["delta_m"].as_f64()), (Some(0.0), Some(0.0)));
    }

    let disjoint = table("disjoint.csv", "A,read,-1,1\nB,turn,0.2,-0.4\n");
    assert_eq!(code(&run(d, &["analyze", "--from-coefficients", disjoint.to_str().unwrap(), "--output-dir", "o3"])), 0);
    assert_eq!(code(&run(d, &["compare", "--output-dir", "o3"])), 0);
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("o3/transitions.json")).unwrap()).unwrap();
    assert!(rep["common"].as_array().unwrap().is_empty());
    assert_eq!(rep["only_a"], serde_json::json!(["read"]));
    assert_eq!(rep["only_b"], serde_json::json!(["turn"]));
}

#[test]
fn unknown_window_and_missing_index_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&run(d, &["compare", "--output-dir", "none"])), 2);
    assert_eq!(code(&run(d, &["analyze", "--from-coefficients", REFERENCE, "--output-dir", "out"])), 0);
    let o = run(d, &["compare", "--output-dir", "out", "--windows", "KP2", "KP9"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("KP9"));
}

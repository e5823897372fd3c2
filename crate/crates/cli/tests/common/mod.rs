#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_corpus-mixer");

/// Runs the binary in `dir` with an optional thread count.
pub fn run_in(dir: &Path, threads: Option<usize>, args: &[&str]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.current_dir(dir).args(args).env_remove("CORPUS_MIXER_THREADS");
    if let Some(t) = threads {
        cmd.env("CORPUS_MIXER_THREADS", t.to_string());
    }
    cmd.output().expect("binary runs")
}

pub fn ok(dir: &Path, threads: Option<usize>, args: &[&str]) -> Output {
    let out = run_in(dir, threads, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn read_json(path: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path.as_ref()).unwrap()).unwrap()
}

pub const LAB_SPEC: &str = r#"{
  "n_docs": 2000,
  "scores": [
    {"name": "edu", "topic_offsets": {"Science & Tech.": 2.0, "History": 1.0, "Entertainment": -1.0}, "noise_sigma": 1.0}
  ],
  "embeddings": {"topic_scale": 3.0, "format_scale": 1.0, "noise_sigma": 0.5}
}
"#;

pub const BOWL_LAW: &str = r#"{"taxonomy": "topic", "kind": "quadratic_bowl",
 "center": [0.02, 0.02, 0.02, 0.1, 0.02, 0.02, 0.02, 0.02, 0.02, 0.02, 0.1, 0.1, 0.02, 0.02, 0.02, 0.02, 0.02, 0.2, 0.02, 0.02, 0.1, 0.02, 0.02, 0.02],
 "scale": [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]}
"#;

/// Every seeded stage of the tool, run on relative paths inside `dir`.
pub fn pipeline(dir: &Path, threads: Option<usize>) {
    fs::write(dir.join("spec.json"), LAB_SPEC).unwrap();
    fs::write(dir.join("bowl.json"), BOWL_LAW).unwrap();
    fs::write(
        dir.join("health.json"),
        "{\"taxonomy\":\"topic\",\"weights\":{\"Health\":0.5,\"Science & Tech.\":0.5}}\n",
    )
    .unwrap();
    fs::write(
        dir.join("tutorial.json"),
        "{\"taxonomy\":\"format\",\"weights\":{\"Tutorial\":1.0}}\n",
    )
    .unwrap();
    let t = threads;
    #[rustfmt::skip]
    let steps: &[&[&str]] = &[
        &["lab", "generate", "--spec", "spec.json", "--seed", "7", "--out", "corpus.jsonl",
          "--embeddings-out", "emb.bin", "--ids-out", "ids.txt"],
        &["stats", "--input", "corpus.jsonl", "--report", "stats.json",
          "--proportions", "prior.json", "--taxonomy", "topic"],
        &["sample-mixtures", "--prior", "prior.json", "--n", "48", "--seed", "3", "--out", "mixes"],
        &["lab", "regmix", "--law", "bowl.json", "--mixtures", "mixes", "--holdout", "8",
          "--trees", "40", "--n", "1500", "--steps", "4", "--line-search-points", "50",
          "--out", "regmix.json", "--observations", "obs.jsonl"],
        &["fit", "--observations", "obs.jsonl", "--target", "bowl", "--trees", "40",
          "--holdout", "8", "--out", "model.json", "--report", "fit.json"],
        &["search", "--model", "model.json", "--prior", "prior.json", "--n", "1500", "--steps", "4",
          "--line-search-points", "50", "--out", "best.json", "--trace", "trace.json"],
        &["select", "--input", "corpus.jsonl", "--mixture", "best.json", "--budget", "200000",
          "--redistribute", "--seed", "5", "--holdout-fraction", "0.1", "--out", "sel"],
        &["select", "--input", "corpus.jsonl", "--mixture", "best.json", "--budget", "200000",
          "--redistribute", "--mode", "quality", "--score", "edu", "--out", "selq"],
        &["implicit", "--input", "corpus.jsonl", "--manifest", "selq/manifest.jsonl",
          "--taxonomy", "topic", "--out", "implicit.json"],
        &["cluster", "--embeddings", "emb.bin", "--ids", "ids.txt", "--seed", "2",
          "--input", "corpus.jsonl", "--out", "clusters.json", "--assignments", "assign.jsonl"],
        &["compose", "--input", "corpus.jsonl", "--topic-mixture", "health.json",
          "--format-mixture", "tutorial.json", "--score", "edu", "--budget", "20000", "--out", "comp"],
    ];
    for args in steps {
        ok(dir, t, args);
    }
}

/// All files under `dir`, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, at: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(at).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

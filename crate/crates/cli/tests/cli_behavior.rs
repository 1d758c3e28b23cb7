//! Exit codes, resumability, and guard rails of the command-line tool.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn write_corpus(path: &Path, train: usize, dev: usize) {
    let mut lines = Vec::new();
    let mut serial = 0usize;
    for (split, count) in [("train", train), ("dev", dev)] {
        for _ in 0..count {
            serial += 1;
            let label = if serial.is_multiple_of(3) { "NO" } else { "YES" };
            let theme = if label == "YES" { "violation breach" } else { "lawful dismissed" };
            lines.push(format!(
                r#"{{"id":"{split}-{serial:03}","text":"The case {serial} concerns {theme}. Another sentence {serial} follows.","label":"{label}","split":"{split}"}}"#
            ));
        }
    }
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

struct Setup {
    dir: tempfile::TempDir,
    config: PathBuf,
}

/// `broken` marks backend kinds pointed at an unreachable endpoint.
fn setup(broken: &[&str]) -> Setup {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&dir.path().join("corpus.jsonl"), 12, 6);
    let endpoint = |kind: &str| {
        if broken.contains(&kind) {
            "http://127.0.0.1:1/unreachable"
        } else {
            "stub"
        }
    };
    let config = dir.path().join("run.toml");
    let body = format!(
        r#"corpus = "{corpus}"
label_space = "binary"
output_dir = "{out}"
seed = 7
workers = 2

[backends.summarize]
endpoint = "{sum}"
context_window = 1024
max_retries = 0
timeout_secs = 2

[backends.embed]
endpoint = "{emb}"
context_window = 1024
embedding_dim = 32
max_retries = 0
timeout_secs = 2

[backends.generate]
endpoint = "{gen}"
context_window = 2048
max_retries = 0
timeout_secs = 2

[index]
mode = "forest"
n_trees = 10
leaf_size = 4
"#,
        corpus = dir.path().join("corpus.jsonl").display(),
        out = dir.path().join("out").display(),
        sum = endpoint("summarize"),
        emb = endpoint("embed"),
        gen = endpoint("generate"),
    );
    std::fs::write(&config, body).unwrap();
    Setup { dir, config }
}

fn lexchain(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lexchain"))
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .expect("binary runs")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

#[test]
fn missing_corpus_exits_2_before_any_call() {
    let s = setup(&[]);
    std::fs::remove_file(s.dir.path().join("corpus.jsonl")).unwrap();
    let out = lexchain(&s.config, &["summarize", "--split", "train"]);
    assert_eq!(exit_code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_config_key_exits_2() {
    let s = setup(&[]);
    let mut body = std::fs::read_to_string(&s.config).unwrap();
    body.push_str("\nunknown_key = true\n");
    std::fs::write(&s.config, body).unwrap();
    let out = lexchain(&s.config, &["summarize", "--split", "train"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn summarize_backend_down_exits_3_with_manifest() {
    let s = setup(&["summarize"]);
    let out = lexchain(&s.config, &["summarize", "--split", "train"]);
    assert_eq!(exit_code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = s.dir.path().join("out/failures_summarize_train.jsonl");
    assert!(manifest.exists(), "failure manifest must be written");
    let text = std::fs::read_to_string(manifest).unwrap();
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn classify_backend_down_exits_4_after_recording_failures() {
    let s = setup(&["generate"]);
    assert_eq!(exit_code(&lexchain(&s.config, &["summarize", "--split", "train"])), 0);
    assert_eq!(exit_code(&lexchain(&s.config, &["index"])), 0);
    let out = lexchain(&s.config, &["classify", "--split", "dev"]);
    assert_eq!(exit_code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = s.dir.path().join("out/failures_dev.jsonl");
    let text = std::fs::read_to_string(manifest).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.contains("\"backend\":true"));
}

#[test]
fn rerun_summarize_hits_cache() {
    let s = setup(&[]);
    let first = lexchain(&s.config, &["summarize", "--split", "train"]);
    assert_eq!(exit_code(&first), 0);
    assert!(String::from_utf8_lossy(&first.stderr).contains("(0 cached, 12 computed)"));
    let second = lexchain(&s.config, &["summarize", "--split", "train"]);
    assert_eq!(exit_code(&second), 0);
    assert!(String::from_utf8_lossy(&second.stderr).contains("(12 cached, 0 computed)"));
}

#[test]
fn index_refuses_non_train_summaries() {
    let s = setup(&[]);
    assert_eq!(exit_code(&lexchain(&s.config, &["summarize", "--split", "dev"])), 0);
    std::fs::copy(
        s.dir.path().join("out/summaries_dev.jsonl"),
        s.dir.path().join("out/summaries_train.jsonl"),
    )
    .unwrap();
    let out = lexchain(&s.config, &["index"]);
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("not train"));
}

#[test]
fn index_rerun_is_byte_identical() {
    let s = setup(&[]);
    assert_eq!(exit_code(&lexchain(&s.config, &["summarize", "--split", "train"])), 0);
    assert_eq!(exit_code(&lexchain(&s.config, &["index"])), 0);
    let first = std::fs::read(s.dir.path().join("out/index.bin")).unwrap();
    assert_eq!(exit_code(&lexchain(&s.config, &["index"])), 0);
    let second = std::fs::read(s.dir.path().join("out/index.bin")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn classify_limit_is_reproducible() {
    let s = setup(&[]);
    assert_eq!(exit_code(&lexchain(&s.config, &["summarize", "--split", "train"])), 0);
    assert_eq!(exit_code(&lexchain(&s.config, &["index"])), 0);
    assert_eq!(
        exit_code(&lexchain(&s.config, &["classify", "--split", "dev", "--limit", "3"])),
        0
    );
    let first = std::fs::read(s.dir.path().join("out/predictions_dev.jsonl")).unwrap();
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), 3);
    assert_eq!(
        exit_code(&lexchain(&s.config, &["classify", "--split", "dev", "--limit", "3"])),
        0
    );
    let second = std::fs::read(s.dir.path().join("out/predictions_dev.jsonl")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn eval_subset_halves_supports() {
    let s = setup(&[]);
    assert_eq!(exit_code(&lexchain(&s.config, &["pipeline", "--split", "dev"])), 0);
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(s.dir.path().join("out/report_dev.json")).unwrap(),
    )
    .unwrap();
    let total_support: u64 = report["per_label"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["support"].as_u64().unwrap())
        .sum();
    assert_eq!(total_support, 6);

    // Evaluate the first half of the dev split only.
    let ids: Vec<String> = std::fs::read_to_string(s.dir.path().join("out/predictions_dev.jsonl"))
        .unwrap()
        .lines()
        .take(3)
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["doc_id"]
            .as_str()
            .unwrap()
            .to_string())
        .collect();
    let subset_path = s.dir.path().join("subset_ids.txt");
    std::fs::write(&subset_path, ids.join("\n") + "\n").unwrap();
    let out = lexchain(
        &s.config,
        &["eval", "--split", "dev", "--subset", subset_path.to_str().unwrap()],
    );
    assert_eq!(exit_code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(s.dir.path().join("out/report_dev.json")).unwrap(),
    )
    .unwrap();
    let subset_support: u64 = report["per_label"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["support"].as_u64().unwrap())
        .sum();
    assert_eq!(subset_support, 3);
}

#[test]
fn flag_overrides_beat_config() {
    let s = setup(&[]);
    // Seed flag changes the sampled subset; identical flag values agree.
    assert_eq!(exit_code(&lexchain(&s.config, &["summarize", "--split", "train"])), 0);
    assert_eq!(exit_code(&lexchain(&s.config, &["index"])), 0);
    let run = |seed: &str| {
        assert_eq!(
            exit_code(&lexchain(
                &s.config,
                &["classify", "--split", "dev", "--limit", "2", "--seed", seed]
            )),
            0
        );
        std::fs::read(s.dir.path().join("out/predictions_dev.jsonl")).unwrap()
    };
    let a1 = run("100");
    let a2 = run("100");
    assert_eq!(a1, a2);
    let ids = |bytes: &[u8]| -> Vec<String> {
        String::from_utf8_lossy(bytes)
            .lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["doc_id"]
                .as_str()
                .unwrap()
                .to_string())
            .collect()
    };
    let b = run("101");
    assert_ne!(ids(&a1), ids(&b), "different seeds should sample differently");
}

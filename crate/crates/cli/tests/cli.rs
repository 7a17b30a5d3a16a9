use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hanforge::data::{load_dataset, tokenize_all, DatasetFormat, Label, Vocabulary};
use hanforge::encoders::load_model;
use hanforge::metrics::{evaluate, EvalResult};
use hanforge::training::predict_all;
use hanforge::viz::{embedded_trace, read_trace};

fn hanforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hanforge"))
        .args(args)
        .env_remove("HANFORGE_THREADS")
        .output()
        .expect("spawn hanforge")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn ok(o: Output) -> Output {
    assert_eq!(code(&o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, n: &str, seed: &str) {
    ok(hanforge(&["synth", "--n", n, "--seed", seed, "--out", p(dir)]));
}

#[test]
fn no_arguments_prints_usage_and_fails() {
    let o = hanforge(&[]);
    assert_eq!(code(&o), 1);
    let text = String::from_utf8_lossy(&o.stdout).to_string() + &String::from_utf8_lossy(&o.stderr);
    assert!(text.contains("Usage"));
}

#[test]
fn unknown_subcommand_and_flag_fail_with_usage() {
    assert_eq!(code(&hanforge(&["frobnicate"])), 1);
    let o = hanforge(&["synth", "--out", "x", "--bogus"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn help_documents_canonical_flags() {
    let o = ok(hanforge(&["train", "--help"]));
    let help = String::from_utf8_lossy(&o.stdout);
    for flag in [
        "--data",
        "--embeddings",
        "--variant",
        "--out",
        "--seed",
        "--config",
        "--batch-size",
        "--epochs",
        "--lr",
        "--max-words",
        "--max-sentences",
    ] {
        assert!(help.contains(flag), "{flag} missing from train --help");
    }
    let help = String::from_utf8_lossy(&ok(hanforge(&["visualize", "--help"])).stdout).to_string();
    assert!(help.contains("--model") && help.contains("--top-k"));
    let help = String::from_utf8_lossy(&ok(hanforge(&["baseline", "--help"])).stdout).to_string();
    assert!(help.contains("--scenario"));
}

#[test]
fn synth_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    synth(&a, "200", "7");
    synth(&b, "200", "7");
    synth(&c, "200", "8");
    for f in ["train.jsonl", "test.jsonl"] {
        let x = fs::read(a.join(f)).unwrap();
        assert_eq!(x, fs::read(b.join(f)).unwrap(), "{f}");
        assert_ne!(x, fs::read(c.join(f)).unwrap(), "{f}");
    }
    let train = load_dataset(&a.join("train.jsonl"), DatasetFormat::Jsonl).unwrap();
    assert_eq!(train.articles.len(), 200);
    assert!(train.rejected.is_empty());
    assert!(a.join("manifest.json").exists());
}

#[test]
fn missing_input_fails_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = hanforge(&["train", "--data", p(&dir.path().join("absent.jsonl")), "--out", p(&out)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--data"));
    assert!(!out.exists());
}

#[test]
fn invalid_values_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "40", "1");
    let data = dir.path().join("train.jsonl");
    let out = dir.path().join("run");
    let o = hanforge(&["train", "--data", p(&data), "--batch-size", "0", "--out", p(&out)]);
    assert_eq!(code(&o), 1);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"train\": {\"epochs\": \"many\"}}").unwrap();
    let o = hanforge(&["train", "--data", p(&data), "--config", p(&bad), "--out", p(&out)]);
    assert_eq!(code(&o), 1);
    let o = Command::new(env!("CARGO_BIN_EXE_hanforge"))
        .args(["synth", "--out", p(&out)])
        .env("HANFORGE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = hanforge(&["synth", "--n", "40", "--out", p(&blocker.join("sub"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn train_evaluate_predict_visualize_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synth(&data, "60", "5");
    let (train, test) = (data.join("train.jsonl"), data.join("test.jsonl"));
    let run = dir.path().join("run");
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"variant": "v1", "hyper": {"embedding_dim": 8, "hidden_size": 4}, "train": {"epochs": 5}}"#)
        .unwrap();
    ok(hanforge(&[
        "train", "--data", p(&train), "--valid", p(&test), "--config", p(&cfg), "--variant", "v2", "--epochs", "2",
        "--seed", "11", "--out", p(&run),
    ]));
    for f in ["model.hanf", "model.manifest.json", "vocab.txt", "train_state.json", "train_report.json", "manifest.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["config"]["variant"], "v2");
    assert_eq!(manifest["config"]["train"]["epochs"], 2);
    assert_eq!(manifest["config"]["hyper"]["hidden_size"], 4);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(run.join("train_report.json")).unwrap()).unwrap();
    assert_eq!(report["epochs"].as_array().unwrap().len(), 2);

    let model_path = run.join("model.hanf");
    let eval_dir = dir.path().join("eval");
    let o = ok(hanforge(&["evaluate", "--model", p(&model_path), "--data", p(&test), "--out", p(&eval_dir)]));
    let printed: EvalResult = serde_json::from_slice(&o.stdout).unwrap();
    let written: EvalResult = serde_json::from_slice(&fs::read(eval_dir.join("eval.json")).unwrap()).unwrap();
    assert_eq!(printed, written);

    // Metrics must equal the library's on the same scores.
    let (model, _) = load_model(&model_path).unwrap();
    let vocab = Vocabulary::load(&run.join("vocab.txt")).unwrap();
    let articles = load_dataset(&test, DatasetFormat::Jsonl).unwrap().articles;
    let set = tokenize_all(&articles, &vocab, model.hyper.limits()).unwrap();
    let scores = predict_all(&model, &set).unwrap();
    let labels: Vec<Label> = set.iter().map(|a| a.label).collect();
    assert_eq!(printed, evaluate(&scores, &labels, 0.5).unwrap());
    let roc = fs::read_to_string(eval_dir.join("roc.csv")).unwrap();
    assert!(roc.starts_with("fpr,tpr\n"));

    let pred_dir = dir.path().join("pred");
    ok(hanforge(&["predict", "--model", p(&model_path), "--data", p(&test), "--out", p(&pred_dir)]));
    let lines = fs::read_to_string(pred_dir.join("predictions.jsonl")).unwrap();
    let preds: Vec<serde_json::Value> = lines.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(preds.len(), scores.len());
    for (row, s) in preds.iter().zip(&scores) {
        assert_eq!(row["p_unreliable"].as_f64().unwrap(), *s);
    }

    let viz = dir.path().join("viz");
    ok(hanforge(&[
        "visualize", "--model", p(&model_path), "--data", p(&test), "--uid", "synth-test-00003", "--top-k", "2", "--out",
        p(&viz),
    ]));
    let trace = read_trace(&viz.join("traces/synth-test-00003.json")).unwrap();
    let html = fs::read_to_string(viz.join("heatmaps/synth-test-00003.html")).unwrap();
    assert_eq!(embedded_trace(&html).unwrap(), trace);
    assert!((trace.p_unreliable - scores[3]).abs() < 1e-12);
}

#[test]
fn resume_continues_an_interrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "40", "2");
    let data = dir.path().join("train.jsonl");
    let small = ["--max-words", "8", "--max-sentences", "4", "--seed", "3", "--variant", "v1"];
    let run = |extra: &[&str], out: &Path| {
        let mut args = vec!["train", "--data", p(&data), "--out", p(out)];
        args.extend_from_slice(extra);
        ok(hanforge(&args));
    };
    let (full, half, rest) = (dir.path().join("full"), dir.path().join("half"), dir.path().join("rest"));
    run(&[&small[..], &["--epochs", "2"]].concat(), &full);
    run(&[&small[..], &["--epochs", "1"]].concat(), &half);
    run(&["--resume", p(&half), "--epochs", "2"], &rest);
    assert_eq!(fs::read(full.join("model.hanf")).unwrap(), fs::read(rest.join("model.hanf")).unwrap());

    let o = hanforge(&["train", "--data", p(&data), "--resume", p(&half), "--variant", "v2", "--out", p(&rest)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn baseline_table_covers_requested_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "80", "4");
    let out = dir.path().join("base");
    let o = ok(hanforge(&[
        "baseline",
        "--data",
        p(&dir.path().join("train.jsonl")),
        "--test",
        p(&dir.path().join("test.jsonl")),
        "--scenario",
        "title",
        "--scenario",
        "title_concat_body",
        "--out",
        p(&out),
    ]));
    let csv = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "scenario,precision,recall,roc_auc");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("title,") && rows[2].starts_with("title_concat_body,"));
    assert_eq!(fs::read_to_string(out.join("baseline.csv")).unwrap(), csv);
    assert_eq!(code(&hanforge(&["baseline", "--data", "a", "--test", "b", "--scenario", "headline", "--out", "c"])), 1);
}

#[test]
fn build_vocab_matches_training_vocabulary() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "40", "6");
    let data = dir.path().join("train.jsonl");
    let vdir = dir.path().join("vocab");
    ok(hanforge(&["build-vocab", "--data", p(&data), "--out", p(&vdir)]));
    let run = dir.path().join("run");
    ok(hanforge(&[
        "train", "--data", p(&data), "--vocab", p(&vdir.join("vocab.txt")), "--epochs", "0", "--out", p(&run),
    ]));
    assert_eq!(fs::read(vdir.join("vocab.txt")).unwrap(), fs::read(run.join("vocab.txt")).unwrap());

    // A model refuses a vocabulary it was not trained with.
    let other = dir.path().join("other");
    ok(hanforge(&["build-vocab", "--data", p(&data), "--max-vocab", "10", "--out", p(&other)]));
    let o = hanforge(&[
        "evaluate", "--model", p(&run.join("model.hanf")), "--vocab", p(&other.join("vocab.txt")), "--data", p(&data),
        "--out", p(&dir.path().join("e")),
    ]);
    assert_eq!(code(&o), 1);
}

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use hanforge::baselines::{evaluate_scenarios, Scenario};
use hanforge::data::{
    build_embedding_matrix, build_vocab, load_dataset, load_pretrained, tokenize_all, write_jsonl, Article,
    DatasetFormat, Label, TokenizedArticle, Vocabulary,
};
use hanforge::encoders::{load_model, manifest_path, save_model, HanModel, Mode};
use hanforge::metrics::evaluate;
use hanforge::training::{generate_corpus, predict_all, SynthConfig, TrainState, Trainer};
use hanforge::viz::{export_trace, heatmap_document, render_heatmap, TraceRecord};
use hanforge::{HanError, Result, RngState};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::manifest::{write_json, write_text, RunManifest, MANIFEST_FILE};
use crate::{
    BaselineArgs, BuildVocabArgs, Command, CommonArgs, EvaluateArgs, ModelArgs, ModelInput, PredictArgs, SynthArgs,
    TrainArgs, VisualizeArgs,
};

pub const MODEL_FILE: &str = "model.hanf";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const STATE_FILE: &str = "train_state.json";
pub const REPORT_FILE: &str = "train_report.json";
pub const THREADS_ENV: &str = "HANFORGE_THREADS";

pub fn run(command: Command, argv: Vec<String>) -> Result<()> {
    configure_threads()?;
    match command {
        Command::BuildVocab(a) => build_vocab_cmd(a, argv),
        Command::Train(a) => train_cmd(a, argv),
        Command::Evaluate(a) => evaluate_cmd(a, argv),
        Command::Predict(a) => predict_cmd(a, argv),
        Command::Baseline(a) => baseline_cmd(a, argv),
        Command::Visualize(a) => visualize_cmd(a, argv),
        Command::Synth(a) => synth_cmd(a, argv),
    }
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| HanError::Config(format!("{THREADS_ENV} must be a positive integer, got {value:?}")))?;
    // Fails only if a pool already exists, which is harmless.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Every referenced input must exist before any work starts.
fn require_inputs(paths: &[(&str, Option<&Path>)]) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    for (flag, path) in paths {
        if let Some(p) = path {
            if !p.exists() {
                return Err(HanError::Validation(format!("--{flag}: {} does not exist", p.display())));
            }
            found.push(p.to_path_buf());
        }
    }
    Ok(found)
}

fn prepare_out(dir: &Path) -> Result<()> {
    if dir.exists() && !dir.is_dir() {
        return Err(HanError::Validation(format!("--out: {} is not a directory", dir.display())));
    }
    fs::create_dir_all(dir).map_err(|e| HanError::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn base_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
    }
    Ok(cfg)
}

/// The configuration recorded by an earlier `train` run.
fn previous_config(dir: &Path) -> Result<RunConfig> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| HanError::Io {
        path: path.clone(),
        source: e,
    })?;
    let parse = |e: serde_json::Error| HanError::Parse {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    };
    let manifest: serde_json::Value = serde_json::from_str(&text).map_err(parse)?;
    serde_json::from_value(manifest["config"].clone()).map_err(parse)
}

fn apply_model_args(cfg: &mut RunConfig, m: &ModelArgs) {
    if let Some(v) = m.variant {
        cfg.variant = v;
    }
    if let Some(b) = m.batch_size {
        cfg.train.batch_size = b;
    }
    if let Some(e) = m.epochs {
        cfg.train.epochs = e;
    }
    if let Some(lr) = m.lr {
        cfg.train.lr = lr;
    }
    if let Some(w) = m.max_words {
        cfg.hyper.max_words_per_sentence = w;
    }
    if let Some(s) = m.max_sentences {
        cfg.hyper.max_sentences_per_doc = s;
    }
}

fn load_articles(path: &Path) -> Result<Vec<Article>> {
    let ds = load_dataset(path, DatasetFormat::from_path(path))?;
    for r in &ds.rejected {
        eprintln!("warning: {}:{} skipped: {}", path.display(), r.line, r.reason);
    }
    if ds.articles.is_empty() {
        return Err(HanError::Validation(format!("{} holds no usable articles", path.display())));
    }
    Ok(ds.articles)
}

fn vocab_path(input: &ModelInput) -> PathBuf {
    input.vocab.clone().unwrap_or_else(|| {
        input
            .model
            .parent()
            .map(|p| p.join(VOCAB_FILE))
            .unwrap_or_else(|| PathBuf::from(VOCAB_FILE))
    })
}

fn load_model_input(input: &ModelInput) -> Result<(HanModel, Vocabulary)> {
    let (model, manifest) = load_model(&input.model)?;
    let vocab = Vocabulary::load(&vocab_path(input))?;
    manifest.check_vocab(&vocab)?;
    Ok((model, vocab))
}

fn file_stem_for(uid: &str) -> String {
    let s: String = uid
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "article".into()
    } else {
        s
    }
}

fn build_vocab_cmd(a: BuildVocabArgs, argv: Vec<String>) -> Result<()> {
    let inputs = require_inputs(&[("config", a.common.config.as_deref()), ("data", Some(&a.data))])?;
    let mut cfg = base_config(&a.common)?;
    if let Some(m) = a.max_vocab {
        cfg.max_vocab = m;
    }
    let cfg = cfg.finish()?;
    prepare_out(&a.common.out)?;
    let articles = load_articles(&a.data)?;
    let vocab = build_vocab(&articles, cfg.max_vocab)?;
    let path = a.common.out.join(VOCAB_FILE);
    vocab.save(&path)?;
    eprintln!("vocabulary: {} tokens, fingerprint {}", vocab.size(), vocab.fingerprint());
    let mut m = RunManifest::new("build-vocab", argv, &cfg);
    m.inputs = inputs;
    m.outputs.push(path);
    m.write(&a.common.out)
}

fn train_cmd(a: TrainArgs, argv: Vec<String>) -> Result<()> {
    let resume = a.resume.as_deref();
    let resume_manifest = resume.map(|d| d.join(MANIFEST_FILE));
    let resume_files = resume.map(|d| (d.join(MODEL_FILE), d.join(VOCAB_FILE), d.join(STATE_FILE)));
    let mut checks = vec![
        ("config", a.common.config.as_deref()),
        ("data", Some(a.data.as_path())),
        ("valid", a.valid.as_deref()),
        ("vocab", a.vocab.as_deref()),
        ("embeddings", a.embeddings.as_deref()),
        ("resume", resume),
    ];
    if let Some((m, v, s)) = &resume_files {
        checks.extend([("resume", Some(m.as_path())), ("resume", Some(v.as_path())), ("resume", Some(s.as_path()))]);
        if a.common.config.is_none() {
            checks.push(("resume", resume_manifest.as_deref()));
        }
    }
    let inputs = require_inputs(&checks)?;

    let mut cfg = match resume {
        Some(dir) if a.common.config.is_none() => {
            let mut cfg = previous_config(dir)?;
            if let Some(seed) = a.common.seed {
                cfg.seed = Some(seed);
            }
            cfg
        }
        _ => base_config(&a.common)?,
    };
    apply_model_args(&mut cfg, &a.model);
    if let Some(m) = a.max_vocab {
        cfg.max_vocab = m;
    }

    let train_articles = load_articles(&a.data)?;
    let valid_articles = a.valid.as_deref().map(load_articles).transpose()?;

    let (mut model, vocab, state) = match &resume_files {
        Some((model_path, vocab_path, state_path)) => {
            let (model, manifest) = load_model(model_path)?;
            let vocab = Vocabulary::load(vocab_path)?;
            manifest.check_vocab(&vocab)?;
            if a.model.variant.is_some_and(|v| v != model.variant) {
                return Err(HanError::Validation(format!(
                    "--variant {} conflicts with the {} checkpoint being resumed",
                    cfg.variant, model.variant
                )));
            }
            let text = fs::read_to_string(state_path).map_err(|e| HanError::Io {
                path: state_path.clone(),
                source: e,
            })?;
            let state: TrainState = serde_json::from_str(&text).map_err(|e| HanError::Parse {
                line: e.line(),
                message: format!("{}: {e}", state_path.display()),
            })?;
            cfg.variant = model.variant;
            cfg.hyper = model.hyper;
            (model, vocab, Some(state))
        }
        None => {
            let vocab = match &a.vocab {
                Some(p) => Vocabulary::load(p)?,
                None => build_vocab(&train_articles, cfg.max_vocab)?,
            };
            let pretrained = a.embeddings.as_deref().map(load_pretrained).transpose()?;
            if let Some(p) = &pretrained {
                cfg.hyper.embedding_dim = p.dimension;
            }
            cfg = cfg.finish()?;
            let mut rng = RngState::new(cfg.seed());
            let emb = build_embedding_matrix(&vocab, pretrained.as_ref(), cfg.hyper.embedding_dim, &mut rng)?;
            let model = HanModel::new(cfg.variant, cfg.hyper, emb, &mut rng)?;
            (model, vocab, None)
        }
    };
    let cfg = cfg.finish()?;
    prepare_out(&a.common.out)?;

    let limits = model.hyper.limits();
    let train_set = tokenize_all(&train_articles, &vocab, limits)?;
    let valid_set = valid_articles.as_deref().map(|v| tokenize_all(v, &vocab, limits)).transpose()?;
    let mut trainer = match state {
        Some(s) => Trainer::resume(cfg.train.clone(), &model, s)?,
        None => Trainer::new(cfg.train.clone(), &model, &train_set)?,
    };
    let started = Instant::now();
    trainer.run(&mut model, &train_set, valid_set.as_deref())?;
    for e in &trainer.report().epochs {
        let valid = e.validation.as_ref().and_then(|v| v.roc_auc).map(|x| format!(" valid auc {x:.4}")).unwrap_or_default();
        eprintln!("epoch {:3} loss {:.4} train acc {:.4}{valid}", e.epoch, e.train_loss, e.train.accuracy);
    }

    let out = &a.common.out;
    let model_path = out.join(MODEL_FILE);
    save_model(&model, &vocab, &model_path)?;
    let vocab_out = out.join(VOCAB_FILE);
    vocab.save(&vocab_out)?;
    let mut state = trainer.state();
    state.report.model_path = Some(model_path.display().to_string());
    write_json(&out.join(STATE_FILE), &state)?;
    let report = state.report.clone();
    write_json(&out.join(REPORT_FILE), &report)?;

    let mut m = RunManifest::new("train", argv, &cfg);
    m.inputs = inputs;
    m.outputs = vec![
        model_path.clone(),
        manifest_path(&model_path),
        vocab_out,
        out.join(STATE_FILE),
        out.join(REPORT_FILE),
    ];
    let mut seconds = trainer.report().epoch_seconds.clone();
    if seconds.is_empty() {
        seconds.push(started.elapsed().as_secs_f64());
    }
    m.epoch_seconds = Some(seconds);
    m.write(out)?;
    if let Some(reason) = report.aborted {
        return Err(HanError::NonFinite(format!("training aborted: {reason}")));
    }
    Ok(())
}

fn scored(input: &ModelInput, data: &Path) -> Result<(Vec<TokenizedArticle>, Vec<f64>, HanModel)> {
    let (model, vocab) = load_model_input(input)?;
    let articles = load_articles(data)?;
    let set = tokenize_all(&articles, &vocab, model.hyper.limits())?;
    let scores = predict_all(&model, &set)?;
    Ok((set, scores, model))
}

fn model_checks<'a>(common: &'a CommonArgs, input: &'a ModelInput, vocab: &'a Path, data: &'a Path) -> [(&'static str, Option<&'a Path>); 4] {
    [
        ("config", common.config.as_deref()),
        ("model", Some(input.model.as_path())),
        ("vocab", Some(vocab)),
        ("data", Some(data)),
    ]
}

fn evaluate_cmd(a: EvaluateArgs, argv: Vec<String>) -> Result<()> {
    let vp = vocab_path(&a.input);
    let inputs = require_inputs(&model_checks(&a.common, &a.input, &vp, &a.data))?;
    let mut cfg = base_config(&a.common)?;
    if let Some(t) = a.threshold {
        cfg.threshold = t;
    }
    let cfg = cfg.finish()?;
    prepare_out(&a.common.out)?;
    let (set, scores, _) = scored(&a.input, &a.data)?;
    let labels: Vec<Label> = set.iter().map(|x| x.label).collect();
    let result = evaluate(&scores, &labels, cfg.threshold)?;

    let out = &a.common.out;
    let files = [out.join("eval.json"), out.join("roc.csv"), out.join("pr.csv")];
    write_json(&files[0], &result)?;
    write_text(&files[1], &result.roc_csv())?;
    write_text(&files[2], &result.pr_csv())?;
    println!("{}", serde_json::to_string(&result).map_err(|e| HanError::Format(e.to_string()))?);
    let mut m = RunManifest::new("evaluate", argv, &cfg);
    m.inputs = inputs;
    m.outputs = files.to_vec();
    m.write(out)
}

#[derive(Serialize)]
struct Prediction<'a> {
    uid: &'a str,
    p_unreliable: f64,
    predicted: Label,
}

fn predict_cmd(a: PredictArgs, argv: Vec<String>) -> Result<()> {
    let vp = vocab_path(&a.input);
    let inputs = require_inputs(&model_checks(&a.common, &a.input, &vp, &a.data))?;
    let mut cfg = base_config(&a.common)?;
    if let Some(t) = a.threshold {
        cfg.threshold = t;
    }
    let cfg = cfg.finish()?;
    prepare_out(&a.common.out)?;
    let (set, scores, _) = scored(&a.input, &a.data)?;
    let mut lines = String::new();
    for (article, &p) in set.iter().zip(&scores) {
        let predicted = if p >= cfg.threshold { Label::Unreliable } else { Label::Reliable };
        let row = Prediction {
            uid: &article.uid,
            p_unreliable: p,
            predicted,
        };
        lines.push_str(&serde_json::to_string(&row).map_err(|e| HanError::Format(e.to_string()))?);
        lines.push('\n');
    }
    let path = a.common.out.join("predictions.jsonl");
    write_text(&path, &lines)?;
    let mut m = RunManifest::new("predict", argv, &cfg);
    m.inputs = inputs;
    m.outputs.push(path);
    m.write(&a.common.out)
}

fn baseline_cmd(a: BaselineArgs, argv: Vec<String>) -> Result<()> {
    let inputs = require_inputs(&[
        ("config", a.common.config.as_deref()),
        ("data", Some(&a.data)),
        ("test", Some(&a.test)),
    ])?;
    let mut cfg = base_config(&a.common)?;
    if let Some(m) = a.max_vocab {
        cfg.baseline.max_vocab = Some(m);
    }
    let cfg = cfg.finish()?;
    prepare_out(&a.common.out)?;
    let train = load_articles(&a.data)?;
    let test = load_articles(&a.test)?;
    let scenarios = if a.scenario.is_empty() { Scenario::ALL.to_vec() } else { a.scenario.clone() };
    let table = evaluate_scenarios(&train, &test, &scenarios, &cfg.baseline)?;

    let out = &a.common.out;
    let files = [out.join("baseline.csv"), out.join("baseline.json")];
    let csv = table.to_csv();
    write_text(&files[0], &csv)?;
    write_json(&files[1], &table)?;
    print!("{csv}");
    let mut m = RunManifest::new("baseline", argv, &cfg);
    m.inputs = inputs;
    m.outputs = files.to_vec();
    m.write(out)
}

fn visualize_cmd(a: VisualizeArgs, argv: Vec<String>) -> Result<()> {
    let vp = vocab_path(&a.input);
    let inputs = require_inputs(&model_checks(&a.common, &a.input, &vp, &a.data))?;
    let mut cfg = base_config(&a.common)?;
    if let Some(k) = a.top_k {
        cfg.top_k = k;
    }
    let cfg = cfg.finish()?;
    let out = &a.common.out;
    prepare_out(out)?;
    let (model, vocab) = load_model_input(&a.input)?;
    let mut articles = load_articles(&a.data)?;
    if !a.uid.is_empty() {
        articles.retain(|x| a.uid.contains(&x.uid));
        if articles.is_empty() {
            return Err(HanError::Validation("no article matches the requested --uid values".into()));
        }
    }
    if let Some(n) = a.limit {
        articles.truncate(n);
    }
    let set = tokenize_all(&articles, &vocab, model.hyper.limits())?;
    let rendered: Vec<(TraceRecord, String)> = set
        .par_iter()
        .map(|x| {
            let f = model.forward(x, &mut Mode::Eval)?;
            let record = TraceRecord::new(&x.uid, model.variant, f.p_unreliable(), Some(x.label), &f.trace)?;
            let html = render_heatmap(&heatmap_document(&record, cfg.top_k)?)?;
            Ok((record, html))
        })
        .collect::<Result<_>>()?;

    let (traces, heatmaps) = (out.join("traces"), out.join("heatmaps"));
    prepare_out(&traces)?;
    prepare_out(&heatmaps)?;
    let mut m = RunManifest::new("visualize", argv, &cfg);
    m.inputs = inputs;
    for (record, html) in &rendered {
        let stem = file_stem_for(&record.uid);
        let (tp, hp) = (traces.join(format!("{stem}.json")), heatmaps.join(format!("{stem}.html")));
        export_trace(record, &tp)?;
        write_text(&hp, html)?;
        m.outputs.extend([tp, hp]);
    }
    eprintln!("wrote {} traces and heatmaps", rendered.len());
    m.write(out)
}

fn synth_cmd(a: SynthArgs, argv: Vec<String>) -> Result<()> {
    let inputs = require_inputs(&[("config", a.common.config.as_deref())])?;
    let cfg = base_config(&a.common)?.finish()?;
    let synth = SynthConfig {
        n_train: a.n,
        n_test: a.test.unwrap_or(a.n / 2),
        unreliable_fraction: a.unreliable_fraction,
        trigger_rate: a.trigger_rate,
        seed: cfg.seed(),
    };
    let (train, test) = generate_corpus(&synth)?;
    let out = &a.common.out;
    prepare_out(out)?;
    let files = [out.join("train.jsonl"), out.join("test.jsonl")];
    write_jsonl(&files[0], &train)?;
    write_jsonl(&files[1], &test)?;
    let mut m = RunManifest::new("synth", argv, &cfg);
    m.inputs = inputs;
    m.outputs = files.to_vec();
    m.write(out)
}

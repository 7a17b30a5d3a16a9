//! Cross-module runs on small synthetic data: files in, checkpoints,
//! traces and heatmaps out.

use std::fs;

use hanforge::data::{
    build_embedding_matrix, build_vocab, load_dataset, load_pretrained, tokenize_all, write_jsonl, DatasetFormat,
    Label, Vocabulary,
};
use hanforge::encoders::{load_model, save_model, HanModel, HyperParams, Mode, Variant};
use hanforge::metrics::{evaluate, roc_auc};
use hanforge::training::{make_synthetic_corpus, predict_all, train, TrainConfig};
use hanforge::viz::{embedded_trace, export_trace, heatmap_document, read_trace, render_heatmap, TraceRecord};
use hanforge::RngState;

fn small_hyper() -> HyperParams {
    HyperParams {
        embedding_dim: 8,
        hidden_size: 4,
        max_words_per_sentence: 16,
        max_sentences_per_doc: 8,
        ..HyperParams::default()
    }
}

#[test]
fn csv_and_jsonl_load_the_same_articles() {
    let dir = tempfile::tempdir().unwrap();
    let (articles, _) = make_synthetic_corpus(20, 0.5, 1).unwrap();
    let jsonl = dir.path().join("a.jsonl");
    write_jsonl(&jsonl, &articles).unwrap();

    let csv_path = dir.path().join("a.csv");
    let mut w = csv::Writer::from_path(&csv_path).unwrap();
    w.write_record(["uid", "title", "text", "normalizedText", "label"]).unwrap();
    for a in &articles {
        let label = a.label.index().to_string();
        let norm = a.normalized_text.clone().unwrap_or_default();
        w.write_record([a.uid.as_str(), &a.title, &a.text, &norm, &label]).unwrap();
    }
    w.flush().unwrap();

    let from_json = load_dataset(&jsonl, DatasetFormat::from_path(&jsonl)).unwrap();
    let from_csv = load_dataset(&csv_path, DatasetFormat::from_path(&csv_path)).unwrap();
    assert_eq!(from_json.articles, articles);
    assert_eq!(from_csv.articles, articles);
}

#[test]
fn pretrained_rows_seed_the_embedding() {
    let dir = tempfile::tempdir().unwrap();
    let (articles, _) = make_synthetic_corpus(20, 0.5, 2).unwrap();
    let vocab = build_vocab(&articles, 50).unwrap();
    let word = vocab.token(5).unwrap().to_string();
    let path = dir.path().join("emb.txt");
    fs::write(&path, format!("{word} 0.5 -0.25 1\nnot-in-vocab 9 9 9\n")).unwrap();
    let pre = load_pretrained(&path).unwrap();
    let emb = build_embedding_matrix(&vocab, Some(&pre), 3, &mut RngState::new(0)).unwrap();
    assert_eq!(emb.weights.row(5), [0.5, -0.25, 1.0]);
    assert!(emb.weights.row(0).iter().all(|&x| x == 0.0));
    assert!(emb.weights.row(6).iter().all(|x| x.abs() <= 0.05));
    assert!(build_embedding_matrix(&vocab, Some(&pre), 4, &mut RngState::new(0)).is_err());
}

#[test]
fn trained_model_survives_disk_and_explains_itself() {
    let dir = tempfile::tempdir().unwrap();
    let (train_articles, test_articles) = make_synthetic_corpus(80, 0.5, 3).unwrap();
    let vocab = build_vocab(&train_articles, 1000).unwrap();
    let hyper = small_hyper();
    let train_set = tokenize_all(&train_articles, &vocab, hyper.limits()).unwrap();
    let test_set = tokenize_all(&test_articles, &vocab, hyper.limits()).unwrap();

    for variant in [Variant::V1, Variant::V2] {
        let mut rng = RngState::new(3);
        let emb = build_embedding_matrix(&vocab, None, hyper.embedding_dim, &mut rng).unwrap();
        let mut model = HanModel::new(variant, hyper, emb, &mut rng).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 16,
            lr: 0.01,
            threads: Some(1),
            ..TrainConfig::default()
        };
        let report = train(&mut model, &train_set, Some(&test_set), &cfg).unwrap();
        assert!(report.aborted.is_none());
        let first = report.epochs.first().unwrap().train_loss;
        let last = report.epochs.last().unwrap().train_loss;
        assert!(last < first, "{variant}: loss {first} -> {last}");

        let path = dir.path().join(format!("{variant}.hanf"));
        save_model(&model, &vocab, &path).unwrap();
        let (loaded, manifest) = load_model(&path).unwrap();
        manifest.check_vocab(&Vocabulary::parse_file(&vocab.to_file_string()).unwrap()).unwrap();
        let scores = predict_all(&loaded, &test_set).unwrap();
        assert_eq!(scores, predict_all(&model, &test_set).unwrap());
        let labels: Vec<Label> = test_set.iter().map(|a| a.label).collect();
        let eval = evaluate(&scores, &labels, 0.5).unwrap();
        assert_eq!(eval.roc_auc, Some(roc_auc(&scores, &labels).unwrap()));

        let a = &test_set[0];
        let out = loaded.forward(a, &mut Mode::Eval).unwrap();
        let record = TraceRecord::new(&a.uid, variant, out.p_unreliable(), Some(a.label), &out.trace).unwrap();
        let trace_path = dir.path().join(format!("{variant}.trace.json"));
        export_trace(&record, &trace_path).unwrap();
        assert_eq!(read_trace(&trace_path).unwrap(), record);

        let doc = heatmap_document(&record, 2).unwrap();
        let sentence_rows: Vec<_> = doc.rows.iter().filter(|r| !r.is_title).collect();
        assert!(sentence_rows.len() <= 2);
        assert!(sentence_rows.windows(2).all(|w| w[0].weight >= w[1].weight));
        let html = render_heatmap(&doc).unwrap();
        assert!(!html.contains("<link") && !html.contains("src=\"http"));
        assert_eq!(embedded_trace(&html).unwrap(), record);
        assert_eq!(record.article_weights.is_some(), variant == Variant::V2);
    }
}

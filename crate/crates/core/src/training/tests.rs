use super::*;
use crate::data::{build_embedding_matrix, build_vocab, tokenize_all, Label, TokenizedArticle, Vocabulary};
use crate::encoders::{HanModel, HyperParams, Variant};
use crate::tensor::RngState;

fn small_hyper() -> HyperParams {
    HyperParams {
        embedding_dim: 8,
        hidden_size: 4,
        ..HyperParams::default()
    }
}

fn setup(variant: Variant, n: usize, seed: u64) -> (HanModel, Vec<TokenizedArticle>, Vocabulary) {
    let (train, _) = make_synthetic_corpus(n, 0.5, seed).unwrap();
    let vocab = build_vocab(&train, 1000).unwrap();
    let hyper = small_hyper();
    let mut rng = RngState::new(seed);
    let emb = build_embedding_matrix(&vocab, None, hyper.embedding_dim, &mut rng).unwrap();
    let model = HanModel::new(variant, hyper, emb, &mut rng).unwrap();
    let data = tokenize_all(&train, &vocab, hyper.limits()).unwrap();
    (model, data, vocab)
}

fn config(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 8,
        seed: 5,
        threads: Some(1),
        ..TrainConfig::default()
    }
}

#[test]
fn zero_epochs_leaves_model_unchanged() {
    let (mut model, data, _) = setup(Variant::V1, 30, 1);
    let before = model.clone();
    let report = train(&mut model, &data, None, &config(0)).unwrap();
    assert!(report.epochs.is_empty());
    assert_eq!(model, before);
}

#[test]
fn batch_of_identical_articles_averages_to_one_gradient() {
    let (model, data, _) = setup(Variant::V2, 30, 2);
    let a = &data[0];
    let (single, _, _) = batch_gradient(&model, &[(7, a)], [1.0, 1.0], 3).unwrap();
    let batch: Vec<(u64, &TokenizedArticle)> = (0..5).map(|_| (7, a)).collect();
    let (mean, _, _) = batch_gradient(&model, &batch, [1.0, 1.0], 3).unwrap();
    for ((name, _), (_, _)) in single.named_views().iter().zip(mean.named_views()) {
        let x = single.dense(name, &model).unwrap();
        let y = mean.dense(name, &model).unwrap();
        assert!(x.max_abs_diff(&y) < 1e-12, "{name}");
    }
}

#[test]
fn loss_scales_with_a_common_class_weight_factor() {
    let (model, data, _) = setup(Variant::V1, 30, 3);
    let batch: Vec<(u64, &TokenizedArticle)> = data.iter().take(6).enumerate().map(|(i, a)| (i as u64, a)).collect();
    let (_, base, _) = batch_gradient(&model, &batch, [0.7, 1.9], 1).unwrap();
    let (_, scaled, _) = batch_gradient(&model, &batch, [0.7 * 3.0, 1.9 * 3.0], 1).unwrap();
    assert!((scaled - 3.0 * base).abs() < 1e-12 * base.abs().max(1.0));
}

#[test]
fn random_labels_start_near_chance() {
    let (mut model, mut data, _) = setup(Variant::V1, 60, 4);
    let mut rng = RngState::new(99);
    for (i, a) in data.iter_mut().enumerate() {
        a.label = if i % 2 == 0 { Label::Reliable } else { Label::Unreliable };
    }
    rng.shuffle(&mut data);
    let report = train(&mut model, &data, None, &config(1)).unwrap();
    let loss = report.epochs[0].train_loss;
    assert!((loss - std::f64::consts::LN_2).abs() < 0.1, "first-epoch loss {loss}");
}

#[test]
fn runs_are_bit_reproducible_and_thread_count_independent() {
    let (model, data, _) = setup(Variant::V2, 40, 5);
    let run = |threads| {
        let mut m = model.clone();
        let cfg = TrainConfig { threads: Some(threads), ..config(2) };
        let r = train(&mut m, &data, Some(&data[..10]), &cfg).unwrap();
        (m, serde_json::to_string(&r).unwrap())
    };
    let (m1, r1) = run(1);
    let (m2, r2) = run(1);
    let (m3, r3) = run(3);
    assert_eq!(m1, m2);
    assert_eq!(r1, r2);
    assert_eq!(m1, m3);
    assert_eq!(r1, r3);
}

#[test]
fn resuming_matches_an_uninterrupted_run() {
    let (model, data, _) = setup(Variant::V1, 30, 6);
    let mut straight = model.clone();
    let full = train(&mut straight, &data, None, &config(3)).unwrap();

    let mut resumed = model.clone();
    let mut first = Trainer::new(config(1), &resumed, &data).unwrap();
    first.run(&mut resumed, &data, None).unwrap();
    let state: TrainState = serde_json::from_str(&serde_json::to_string(&first.state()).unwrap()).unwrap();
    let mut second = Trainer::resume(config(3), &resumed, state).unwrap();
    second.run(&mut resumed, &data, None).unwrap();
    assert_eq!(resumed, straight);
    assert_eq!(
        serde_json::to_string(second.report()).unwrap(),
        serde_json::to_string(&full).unwrap()
    );
}

#[test]
fn non_finite_loss_aborts_and_keeps_last_good_weights() {
    let (mut model, data, _) = setup(Variant::V1, 30, 7);
    model.classifier.bias.data_mut()[0] = f64::NAN;
    let before = model.clone();
    let report = train(&mut model, &data, None, &config(2)).unwrap();
    assert!(report.aborted.is_some());
    assert!(report.epochs.is_empty());
    assert_eq!(format!("{model:?}"), format!("{before:?}"));
}

#[test]
fn early_stopping_restores_the_best_epoch() {
    let (mut model, data, _) = setup(Variant::V1, 40, 8);
    let cfg = TrainConfig {
        early_stop_patience: 1,
        ..config(6)
    };
    let report = train(&mut model, &data[..30], Some(&data[30..]), &cfg).unwrap();
    let best = report.best_epoch.unwrap();
    let best_auc = report.epochs[best - 1].validation.unwrap().roc_auc.unwrap();
    for e in &report.epochs {
        assert!(e.validation.unwrap().roc_auc.unwrap() <= best_auc);
    }
    let scores = predict_all(&model, &data[30..]).unwrap();
    let labels: Vec<Label> = data[30..].iter().map(|a| a.label).collect();
    assert_eq!(crate::metrics::roc_auc(&scores, &labels).unwrap(), best_auc);
}

#[test]
fn training_reduces_loss() {
    let (mut model, data, _) = setup(Variant::V2, 60, 9);
    let cfg = TrainConfig { lr: 1e-2, ..config(5) };
    let report = train(&mut model, &data, None, &cfg).unwrap();
    let first = report.epochs.first().unwrap().train.loss;
    let last = report.epochs.last().unwrap().train.loss;
    assert!(last < first, "{first} -> {last}");
    assert!(report.epochs.iter().all(|e| e.train_loss.is_finite()));
}

#[test]
fn config_validation() {
    assert!(TrainConfig { batch_size: 0, ..TrainConfig::default() }.validate().is_err());
    assert!(TrainConfig { lr: -1.0, ..TrainConfig::default() }.validate().is_err());
    let parsed: TrainConfig = serde_json::from_str(r#"{"epochs": 4, "class_weights": [1.0, 2.0]}"#).unwrap();
    assert_eq!(parsed.batch_size, 64);
    assert_eq!(parsed.class_weights, ClassWeights::Explicit([1.0, 2.0]));
}

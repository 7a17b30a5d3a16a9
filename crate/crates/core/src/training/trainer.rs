use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{adam_update, AdamConfig, AdamState};
use super::loss::{weighted_cross_entropy, ClassWeights};
use crate::data::{Label, TokenizedArticle};
use crate::encoders::{model_backward, HanGrads, HanModel, Mode, Variant};
use crate::error::{HanError, Result};
use crate::metrics::{evaluate, DEFAULT_THRESHOLD};
use crate::tensor::{RngSnapshot, RngState};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub class_weights: ClassWeights,
    pub seed: u64,
    /// Epochs without a validation ROC-AUC improvement before stopping;
    /// 0 disables early stopping.
    pub early_stop_patience: usize,
    /// Worker threads for per-article forward/backward; `None` uses the
    /// global pool. Results are reduced in article order either way.
    pub threads: Option<usize>,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            batch_size: 64,
            epochs: 10,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            epsilon: adam.epsilon,
            class_weights: ClassWeights::Auto,
            seed: 0,
            early_stop_patience: 3,
            threads: None,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(HanError::Config("batch_size must be ≥ 1".into()));
        }
        if self.threads == Some(0) {
            return Err(HanError::Config("threads must be ≥ 1".into()));
        }
        self.adam().validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub loss: f64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub roc_auc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean weighted loss over the epoch's training batches (dropout on).
    pub train_loss: f64,
    /// Label probabilities that hit the log clamp this epoch.
    pub clamped: usize,
    /// Evaluation-mode metrics on the training set after the epoch.
    pub train: MetricSummary,
    pub validation: Option<MetricSummary>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub variant: Option<Variant>,
    pub class_weights: [f64; 2],
    pub steps: u64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights the model holds when early stopping tracked one.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
    /// Set when training stopped on a non-finite value; the model holds the
    /// weights from the end of the last good epoch.
    pub aborted: Option<String>,
    pub model_path: Option<String>,
    /// Seconds per epoch. Kept out of the JSON so that reports of repeated
    /// runs compare equal.
    #[serde(skip)]
    pub epoch_seconds: Vec<f64>,
}

impl TrainReport {
    pub fn best_train_accuracy(&self) -> f64 {
        self.epochs.iter().map(|e| e.train.accuracy).fold(0.0, f64::max)
    }
}

/// Everything needed to continue an interrupted run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub epochs_completed: usize,
    pub adam: AdamState,
    pub rng: RngSnapshot,
    pub best_validation_auc: Option<f64>,
    pub epochs_since_best: usize,
    pub report: TrainReport,
}

/// Mini-batch trainer. Holds the optimizer state, the shuffling generator
/// and the running report; the model is passed in on each call.
pub struct Trainer {
    config: TrainConfig,
    weights: [f64; 2],
    adam: AdamState,
    rng: RngState,
    epochs_completed: usize,
    best_auc: Option<f64>,
    best_model: Option<HanModel>,
    since_best: usize,
    report: TrainReport,
}

/// Stream offset keeping per-article dropout generators apart from the
/// shuffling generator (stream 0).
fn dropout_stream(epoch: usize, position: usize) -> u64 {
    ((epoch as u64 + 1) << 32) | position as u64
}

impl Trainer {
    pub fn new(config: TrainConfig, model: &HanModel, train: &[TokenizedArticle]) -> Result<Self> {
        config.validate()?;
        let labels: Vec<Label> = train.iter().map(|a| a.label).collect();
        let weights = config.class_weights.resolve(&labels)?;
        let report = TrainReport {
            variant: Some(model.variant),
            class_weights: weights,
            ..TrainReport::default()
        };
        Ok(Trainer {
            adam: AdamState::for_model(config.adam(), model),
            rng: RngState::new(config.seed),
            weights,
            config,
            epochs_completed: 0,
            best_auc: None,
            best_model: None,
            since_best: 0,
            report,
        })
    }

    /// Continues from a saved state. `config.epochs` is the new total.
    pub fn resume(config: TrainConfig, model: &HanModel, state: TrainState) -> Result<Self> {
        config.validate()?;
        let expected = AdamState::for_model(state.adam.config, model);
        let shapes_match = expected.moments.len() == state.adam.moments.len()
            && expected
                .moments
                .iter()
                .zip(&state.adam.moments)
                .all(|(a, b)| a.name == b.name && a.m.shape() == b.m.shape() && b.v.shape() == a.v.shape());
        if !shapes_match {
            return Err(HanError::Validation("training state does not match the model's parameters".into()));
        }
        let mut adam = state.adam;
        adam.config = config.adam();
        Ok(Trainer {
            weights: state.report.class_weights,
            adam,
            rng: RngState::restore(&state.rng)?,
            config,
            epochs_completed: state.epochs_completed,
            best_auc: state.best_validation_auc,
            best_model: None,
            since_best: state.epochs_since_best,
            report: state.report,
        })
    }

    pub fn state(&self) -> TrainState {
        TrainState {
            epochs_completed: self.epochs_completed,
            adam: self.adam.clone(),
            rng: self.rng.snapshot(),
            best_validation_auc: self.best_auc,
            epochs_since_best: self.since_best,
            report: self.report.clone(),
        }
    }

    pub fn report(&self) -> &TrainReport {
        &self.report
    }

    pub fn into_report(self) -> TrainReport {
        self.report
    }

    pub fn class_weights(&self) -> [f64; 2] {
        self.weights
    }

    /// Trains until `config.epochs` epochs are complete, early stopping
    /// fires or a non-finite value aborts the run.
    pub fn run(
        &mut self,
        model: &mut HanModel,
        train: &[TokenizedArticle],
        valid: Option<&[TokenizedArticle]>,
    ) -> Result<&TrainReport> {
        match self.config.threads {
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| HanError::Config(format!("thread pool: {e}")))?;
                pool.install(|| self.run_inner(model, train, valid))?;
            }
            None => self.run_inner(model, train, valid)?,
        }
        Ok(&self.report)
    }

    fn run_inner(
        &mut self,
        model: &mut HanModel,
        train: &[TokenizedArticle],
        valid: Option<&[TokenizedArticle]>,
    ) -> Result<()> {
        if train.is_empty() && self.epochs_completed < self.config.epochs {
            return Err(HanError::Domain("training set is empty".into()));
        }
        while self.epochs_completed < self.config.epochs && !self.report.stopped_early {
            if !self.run_epoch(model, train, valid)? {
                break;
            }
        }
        if let Some(best) = self.best_model.take() {
            *model = best;
        }
        Ok(())
    }

    /// One epoch. Returns `false` when the run aborted.
    fn run_epoch(
        &mut self,
        model: &mut HanModel,
        train: &[TokenizedArticle],
        valid: Option<&[TokenizedArticle]>,
    ) -> Result<bool> {
        let started = Instant::now();
        let epoch = self.epochs_completed;
        let last_good = model.clone();
        let adam_before = self.adam.clone();
        let mut order: Vec<usize> = (0..train.len()).collect();
        self.rng.shuffle(&mut order);

        let mut loss_sum = 0.0;
        let mut clamped = 0;
        for (b, chunk) in order.chunks(self.config.batch_size).enumerate() {
            let first = b * self.config.batch_size;
            let batch: Vec<(u64, &TokenizedArticle)> = chunk
                .iter()
                .enumerate()
                .map(|(k, &i)| (dropout_stream(epoch, first + k), &train[i]))
                .collect();
            let step = batch_gradient(model, &batch, self.weights, self.config.seed)
                .and_then(|(grads, loss, c)| {
                    if !loss.is_finite() {
                        return Err(HanError::NonFinite(format!("training loss in epoch {}", epoch + 1)));
                    }
                    adam_update(&mut self.adam, model, &grads)?;
                    Ok((loss, c))
                });
            match step {
                Ok((loss, c)) => {
                    loss_sum += loss;
                    clamped += c;
                }
                Err(e @ HanError::NonFinite(_)) => {
                    *model = last_good;
                    self.adam = adam_before;
                    self.report.aborted = Some(e.to_string());
                    return Ok(false);
                }
                Err(e) => return Err(e),
            }
        }
        self.report.steps = self.adam.step;

        let train_metrics = summarize(model, train, self.weights, self.config.threshold)?;
        let validation = match valid {
            Some(v) if !v.is_empty() => Some(summarize(model, v, self.weights, self.config.threshold)?),
            _ => None,
        };
        self.epochs_completed += 1;
        self.report.epochs.push(EpochRecord {
            epoch: self.epochs_completed,
            train_loss: loss_sum / train.len() as f64,
            clamped,
            train: train_metrics,
            validation,
        });
        self.report.epoch_seconds.push(started.elapsed().as_secs_f64());

        if let Some(auc) = validation.and_then(|v| v.roc_auc) {
            if self.config.early_stop_patience > 0 {
                if self.best_auc.map_or(true, |b| auc > b) {
                    self.best_auc = Some(auc);
                    self.best_model = Some(model.clone());
                    self.report.best_epoch = Some(self.epochs_completed);
                    self.since_best = 0;
                } else {
                    self.since_best += 1;
                    if self.since_best >= self.config.early_stop_patience {
                        self.report.stopped_early = true;
                    }
                }
            }
        }
        Ok(true)
    }
}

/// Mean gradient over `batch`, together with the summed loss and the
/// number of clamped probabilities. Per-article work runs in parallel; the
/// results are reduced in batch order.
pub fn batch_gradient(
    model: &HanModel,
    batch: &[(u64, &TokenizedArticle)],
    weights: [f64; 2],
    seed: u64,
) -> Result<(HanGrads, f64, usize)> {
    let per_article: Vec<Result<(HanGrads, f64, bool)>> = batch
        .par_iter()
        .map(|&(stream, article)| {
            let mut rng = RngState::derive(seed, stream);
            let out = model.forward(article, &mut Mode::Train(&mut rng))?;
            let loss = weighted_cross_entropy(out.probs.data(), article.label, weights)?;
            let grads = model_backward(model, &out, &loss.d_logits)?;
            Ok((grads, loss.loss, loss.clamped))
        })
        .collect();
    let mut total = HanGrads::zeros_like(model);
    let mut loss_sum = 0.0;
    let mut clamped = 0;
    for r in per_article {
        let (g, l, c) = r?;
        total.accumulate(&g);
        loss_sum += l;
        clamped += c as usize;
    }
    if !batch.is_empty() {
        total.scale(1.0 / batch.len() as f64);
    }
    Ok((total, loss_sum, clamped))
}

/// Evaluation-mode probabilities of unreliability, in input order.
pub fn predict_all(model: &HanModel, articles: &[TokenizedArticle]) -> Result<Vec<f64>> {
    articles.par_iter().map(|a| model.predict(a)).collect()
}

fn summarize(model: &HanModel, articles: &[TokenizedArticle], weights: [f64; 2], threshold: f64) -> Result<MetricSummary> {
    let scores = predict_all(model, articles)?;
    let labels: Vec<Label> = articles.iter().map(|a| a.label).collect();
    let mut loss = 0.0;
    for (&p, &l) in scores.iter().zip(&labels) {
        loss += weighted_cross_entropy(&[1.0 - p, p], l, weights)?.loss;
    }
    let r = evaluate(&scores, &labels, threshold)?;
    Ok(MetricSummary {
        loss: loss / articles.len() as f64,
        accuracy: r.accuracy,
        precision: r.precision,
        recall: r.recall,
        roc_auc: r.roc_auc,
    })
}

/// Trains `model` in place and returns the report.
pub fn train(
    model: &mut HanModel,
    train_set: &[TokenizedArticle],
    valid: Option<&[TokenizedArticle]>,
    config: &TrainConfig,
) -> Result<TrainReport> {
    let mut trainer = Trainer::new(config.clone(), model, train_set)?;
    trainer.run(model, train_set, valid)?;
    Ok(trainer.into_report())
}

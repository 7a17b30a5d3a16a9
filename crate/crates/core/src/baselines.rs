//! TF-IDF bag-of-words features with a logistic-regression classifier,
//! evaluated under four ways of combining title and body.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{split_sentences, tokenize_words, vocab_from_counts, Article, Label, Vocabulary};
use crate::error::{HanError, Result};
use crate::metrics::{evaluate, EvalResult, DEFAULT_THRESHOLD};
use crate::tensor::sigmoid;
use crate::training::ClassWeights;

/// Document frequencies over a fixed vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct TfidfModel {
    pub vocabulary: Vocabulary,
    /// Indexed by token id; reserved ids stay 0.
    pub doc_freq: Vec<usize>,
    pub n_docs: usize,
}

/// Sparse vector with entries sorted by index.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// No in-vocabulary token contributed.
    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| v * dense[i]).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for &(i, v) in &self.entries {
            d[i] = v;
        }
        d
    }

    /// `[self, other]` with `other`'s indices shifted by `self.dim`.
    pub fn concat(&self, other: &SparseVector) -> SparseVector {
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().map(|&(i, v)| (i + self.dim, v)));
        SparseVector {
            dim: self.dim + other.dim,
            entries,
        }
    }
}

/// Builds an uncapped (or `max_vocab`-capped) vocabulary from `docs` and
/// counts document frequencies over it.
pub fn fit_tfidf(docs: &[Vec<String>], max_vocab: Option<usize>) -> Result<TfidfModel> {
    if docs.is_empty() {
        return Err(HanError::Domain("TF-IDF needs a nonempty corpus".into()));
    }
    let mut counts = BTreeMap::new();
    for d in docs {
        for t in d {
            *counts.entry(t.clone()).or_insert(0usize) += 1;
        }
    }
    let vocab = vocab_from_counts(&counts, max_vocab.unwrap_or(usize::MAX))?;
    fit_tfidf_with_vocab(docs, vocab)
}

pub fn fit_tfidf_with_vocab(docs: &[Vec<String>], vocabulary: Vocabulary) -> Result<TfidfModel> {
    if docs.is_empty() {
        return Err(HanError::Domain("TF-IDF needs a nonempty corpus".into()));
    }
    let mut doc_freq = vec![0usize; vocabulary.size()];
    for d in docs {
        let present: BTreeSet<usize> = d.iter().filter_map(|t| vocabulary.id(t)).collect();
        for id in present {
            doc_freq[id] += 1;
        }
    }
    Ok(TfidfModel {
        vocabulary,
        doc_freq,
        n_docs: docs.len(),
    })
}

impl TfidfModel {
    pub fn dim(&self) -> usize {
        self.vocabulary.size()
    }

    /// `ln((1 + n) / (1 + df)) + 1`.
    pub fn idf(&self, id: usize) -> f64 {
        idf(self.n_docs, self.doc_freq[id])
    }
}

pub fn idf(n_docs: usize, df: usize) -> f64 {
    ((1 + n_docs) as f64 / (1 + df) as f64).ln() + 1.0
}

/// L2-normalized `tf · idf` over in-vocabulary tokens. Unknown tokens are
/// ignored; a document with none left gives the zero vector.
pub fn tfidf_vector(model: &TfidfModel, tokens: &[String]) -> SparseVector {
    let mut tf: BTreeMap<usize, usize> = BTreeMap::new();
    for t in tokens {
        if let Some(id) = model.vocabulary.id(t) {
            *tf.entry(id).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(usize, f64)> = tf.into_iter().map(|(id, c)| (id, c as f64 * model.idf(id))).collect();
    let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        entries.iter_mut().for_each(|(_, v)| *v /= norm);
    }
    SparseVector {
        dim: model.dim(),
        entries,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Title,
    Body,
    /// Title treated as one more body sentence.
    TitlePlusBody,
    /// Separate title and body vectors, concatenated.
    TitleConcatBody,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Title,
        Scenario::Body,
        Scenario::TitlePlusBody,
        Scenario::TitleConcatBody,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Title => "title",
            Scenario::Body => "body",
            Scenario::TitlePlusBody => "title_plus_body",
            Scenario::TitleConcatBody => "title_concat_body",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = HanError;
    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| {
                HanError::Config(format!(
                    "unknown scenario {s:?} (expected title, body, title_plus_body or title_concat_body)"
                ))
            })
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Title and body token lists of an article.
pub fn article_parts(article: &Article) -> (Vec<String>, Vec<String>) {
    let title = tokenize_words(&article.title);
    let body = split_sentences(article.body()).iter().flat_map(|s| tokenize_words(s)).collect();
    (title, body)
}

pub fn scenario_features(article: &Article, scenario: Scenario, model: &TfidfModel) -> SparseVector {
    let (title, body) = article_parts(article);
    match scenario {
        Scenario::Title => tfidf_vector(model, &title),
        Scenario::Body => tfidf_vector(model, &body),
        Scenario::TitlePlusBody => {
            let mut all = title;
            all.extend(body);
            tfidf_vector(model, &all)
        }
        Scenario::TitleConcatBody => tfidf_vector(model, &title).concat(&tfidf_vector(model, &body)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearConfig {
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            lr: 1.0,
            epochs: 300,
            l2: 1e-4,
        }
    }
}

/// Logistic regression `σ(w·x + b)` for the unreliable class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub config: LinearConfig,
}

impl LinearClassifier {
    pub fn predict(&self, x: &SparseVector) -> f64 {
        sigmoid(x.dot(&self.weights) + self.bias)
    }
}

fn target(l: Label) -> f64 {
    l.index() as f64
}

/// Mean class-weighted log loss plus `l2/2 · |w|²`, and its gradient.
pub fn linear_objective(
    clf: &LinearClassifier,
    features: &[SparseVector],
    labels: &[Label],
    weights: [f64; 2],
) -> (f64, Vec<f64>, f64) {
    let n = features.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; clf.weights.len()];
    let mut gb = 0.0;
    for (x, &l) in features.iter().zip(labels) {
        let z = x.dot(&clf.weights) + clf.bias;
        let w = weights[l.index()];
        let y = target(l);
        // log(1 + e^z) - y z, written to stay finite for large |z|.
        loss += w * (z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z);
        let r = w * (sigmoid(z) - y);
        for &(i, v) in &x.entries {
            gw[i] += r * v;
        }
        gb += r;
    }
    loss /= n;
    gb /= n;
    let l2 = clf.config.l2;
    for (g, &wi) in gw.iter_mut().zip(&clf.weights) {
        *g = *g / n + l2 * wi;
    }
    loss += 0.5 * l2 * clf.weights.iter().map(|w| w * w).sum::<f64>();
    (loss, gw, gb)
}

/// Full-batch gradient descent from zero weights.
pub fn fit_linear(
    features: &[SparseVector],
    labels: &[Label],
    class_weights: ClassWeights,
    config: LinearConfig,
) -> Result<LinearClassifier> {
    if features.is_empty() || features.len() != labels.len() {
        return Err(HanError::Domain(format!(
            "{} feature vectors for {} labels",
            features.len(),
            labels.len()
        )));
    }
    if !labels.contains(&Label::Reliable) || !labels.contains(&Label::Unreliable) {
        return Err(HanError::Domain("logistic regression needs both classes present".into()));
    }
    let dim = features[0].dim;
    if features.iter().any(|f| f.dim != dim) {
        return Err(HanError::Domain("feature vectors differ in dimension".into()));
    }
    let weights = class_weights.resolve(labels)?;
    let mut clf = LinearClassifier {
        weights: vec![0.0; dim],
        bias: 0.0,
        config,
    };
    for _ in 0..config.epochs {
        let (_, gw, gb) = linear_objective(&clf, features, labels, weights);
        for (w, g) in clf.weights.iter_mut().zip(&gw) {
            *w -= config.lr * g;
        }
        clf.bias -= config.lr * gb;
    }
    Ok(clf)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub eval: EvalResult,
    /// Test-set scores in input order.
    pub scores: Vec<f64>,
    /// Test articles whose feature vector was all zero.
    pub zero_vectors: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTable {
    pub rows: Vec<ScenarioResult>,
}

impl ScenarioTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("scenario,precision,recall,roc_auc\n");
        for r in &self.rows {
            let auc = r.eval.roc_auc.map_or_else(String::new, |a| a.to_string());
            let _ = writeln!(s, "{},{},{},{}", r.scenario, r.eval.precision, r.eval.recall, auc);
        }
        s
    }

    pub fn get(&self, scenario: Scenario) -> Option<&ScenarioResult> {
        self.rows.iter().find(|r| r.scenario == scenario)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub linear: LinearConfig,
    pub class_weights: ClassWeights,
    pub max_vocab: Option<usize>,
    pub threshold: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            linear: LinearConfig::default(),
            class_weights: ClassWeights::Auto,
            max_vocab: None,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

/// Fits one TF-IDF model on the training titles and bodies, then one
/// classifier per scenario, and scores the test split.
pub fn evaluate_scenarios(
    train: &[Article],
    test: &[Article],
    scenarios: &[Scenario],
    config: &BaselineConfig,
) -> Result<ScenarioTable> {
    let docs: Vec<Vec<String>> = train
        .iter()
        .map(|a| {
            let (mut t, b) = article_parts(a);
            t.extend(b);
            t
        })
        .collect();
    let tfidf = fit_tfidf(&docs, config.max_vocab)?;
    let train_labels: Vec<Label> = train.iter().map(|a| a.label).collect();
    let test_labels: Vec<Label> = test.iter().map(|a| a.label).collect();
    let mut rows = Vec::with_capacity(scenarios.len());
    for &scenario in scenarios {
        let x_train: Vec<SparseVector> = train.iter().map(|a| scenario_features(a, scenario, &tfidf)).collect();
        let clf = fit_linear(&x_train, &train_labels, config.class_weights, config.linear)?;
        let x_test: Vec<SparseVector> = test.iter().map(|a| scenario_features(a, scenario, &tfidf)).collect();
        let scores: Vec<f64> = x_test.iter().map(|x| clf.predict(x)).collect();
        let eval = evaluate(&scores, &test_labels, config.threshold)?;
        rows.push(ScenarioResult {
            scenario,
            eval,
            scores,
            zero_vectors: x_test.iter().filter(|x| x.is_zero()).count(),
        });
    }
    Ok(ScenarioTable { rows })
}

use serde::{Deserialize, Serialize};

use crate::error::{HanError, Result};
use crate::layers::{
    AttentionParams, DenseParams, EmbeddingGrad, EmbeddingMatrix, GruParams, ATTENTION_TENSOR_NAMES,
    DENSE_TENSOR_NAMES, GRU_TENSOR_NAMES,
};
use crate::tensor::{RngState, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Title prepended to the body as sentence 0 of one document.
    V1,
    /// Title and body encoded separately, combined by article attention.
    V2,
}

impl std::str::FromStr for Variant {
    type Err = HanError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "v1" => Ok(Variant::V1),
            "v2" => Ok(Variant::V2),
            other => Err(HanError::Config(format!("unknown variant {other:?} (expected v1 or v2)"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::V1 => "v1",
            Variant::V2 => "v2",
        })
    }
}

/// How the v2 article BiGRU consumes the title and body encodings.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArticleEncoding {
    /// Each encoding is its own length-1 sequence from zero state.
    #[default]
    Independent,
    /// `[title, body]` as one length-2 sequence.
    Sequence,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    pub max_words_per_sentence: usize,
    pub max_sentences_per_doc: usize,
    pub embedding_dim: usize,
    /// Hidden size per GRU direction; annotations have `2 * hidden_size`.
    pub hidden_size: usize,
    /// Attention projection size; `None` means the annotation size.
    pub attention_dim: Option<usize>,
    pub dropout_rate: f64,
    pub article_encoding: ArticleEncoding,
    /// Title and body share one article BiGRU.
    pub share_article_bigru: bool,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            max_words_per_sentence: 64,
            max_sentences_per_doc: 64,
            embedding_dim: 100,
            hidden_size: 50,
            attention_dim: None,
            dropout_rate: 0.5,
            article_encoding: ArticleEncoding::Independent,
            share_article_bigru: true,
        }
    }
}

impl HyperParams {
    pub fn annotation_dim(&self) -> usize {
        2 * self.hidden_size
    }

    pub fn attention_dim(&self) -> usize {
        self.attention_dim.unwrap_or_else(|| self.annotation_dim())
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("max_words_per_sentence", self.max_words_per_sentence),
            ("max_sentences_per_doc", self.max_sentences_per_doc),
            ("embedding_dim", self.embedding_dim),
            ("hidden_size", self.hidden_size),
            ("attention_dim", self.attention_dim()),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(HanError::Config(format!("{name} must be ≥ 1")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(HanError::Config(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.article_encoding == ArticleEncoding::Sequence && !self.share_article_bigru {
            return Err(HanError::Config(
                "sequence article encoding runs one BiGRU; it cannot use separate title/body parameters".into(),
            ));
        }
        Ok(())
    }

    pub fn limits(&self) -> crate::data::SequenceLimits {
        crate::data::SequenceLimits {
            max_words: self.max_words_per_sentence,
            max_sentences: self.max_sentences_per_doc,
        }
    }
}

/// Article-level parameters (v2 only).
#[derive(Clone, Debug, PartialEq)]
pub struct ArticleParams {
    pub fwd: GruParams,
    pub bwd: GruParams,
    /// Separate body BiGRU when title and body do not share parameters.
    pub body: Option<(GruParams, GruParams)>,
    pub attn: AttentionParams,
}

impl ArticleParams {
    pub fn body_bigru(&self) -> (&GruParams, &GruParams) {
        match &self.body {
            Some((f, b)) => (f, b),
            None => (&self.fwd, &self.bwd),
        }
    }
}

/// Full parameter set of one hierarchical attention network.
#[derive(Clone, Debug, PartialEq)]
pub struct HanModel {
    pub variant: Variant,
    pub hyper: HyperParams,
    pub embedding: EmbeddingMatrix,
    pub word_fwd: GruParams,
    pub word_bwd: GruParams,
    pub word_attn: AttentionParams,
    pub sent_fwd: GruParams,
    pub sent_bwd: GruParams,
    pub sent_attn: AttentionParams,
    pub article: Option<ArticleParams>,
    pub classifier: DenseParams,
}

impl HanModel {
    /// Randomly initialized model around an existing embedding matrix.
    pub fn new(
        variant: Variant,
        hyper: HyperParams,
        embedding: EmbeddingMatrix,
        rng: &mut RngState,
    ) -> Result<Self> {
        hyper.validate()?;
        if embedding.dim() != hyper.embedding_dim {
            return Err(HanError::Config(format!(
                "embedding matrix has dimension {}, hyperparameters say {}",
                embedding.dim(),
                hyper.embedding_dim
            )));
        }
        let h = hyper.hidden_size;
        let ann = hyper.annotation_dim();
        let att = hyper.attention_dim();
        let word_fwd = GruParams::init(hyper.embedding_dim, h, rng)?;
        let word_bwd = GruParams::init(hyper.embedding_dim, h, rng)?;
        let word_attn = AttentionParams::init(ann, att, rng)?;
        let sent_fwd = GruParams::init(ann, h, rng)?;
        let sent_bwd = GruParams::init(ann, h, rng)?;
        let sent_attn = AttentionParams::init(ann, att, rng)?;
        let article = match variant {
            Variant::V1 => None,
            Variant::V2 => {
                let fwd = GruParams::init(ann, h, rng)?;
                let bwd = GruParams::init(ann, h, rng)?;
                let body = if hyper.share_article_bigru {
                    None
                } else {
                    Some((GruParams::init(ann, h, rng)?, GruParams::init(ann, h, rng)?))
                };
                let attn = AttentionParams::init(ann, att, rng)?;
                Some(ArticleParams { fwd, bwd, body, attn })
            }
        };
        let classifier = DenseParams::init(ann, rng)?;
        let model = HanModel {
            variant,
            hyper,
            embedding,
            word_fwd,
            word_bwd,
            word_attn,
            sent_fwd,
            sent_bwd,
            sent_attn,
            article,
            classifier,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.vocab_size()
    }

    /// Checks the dimension chain embedding → word BiGRU → sentence BiGRU →
    /// (article BiGRU) → classifier.
    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        let h = self.hyper.hidden_size;
        let ann = self.hyper.annotation_dim();
        let att = self.hyper.attention_dim();
        let check_gru = |name: &str, p: &GruParams, input: usize| -> Result<()> {
            p.validate()?;
            if p.input_size() != input || p.hidden_size() != h {
                return Err(HanError::Config(format!(
                    "{name}: GRU is {}→{}, expected {input}→{h}",
                    p.input_size(),
                    p.hidden_size()
                )));
            }
            Ok(())
        };
        let check_attn = |name: &str, p: &AttentionParams| -> Result<()> {
            p.validate()?;
            if p.annotation_size() != ann || p.attention_size() != att {
                return Err(HanError::Config(format!(
                    "{name}: attention is {}→{}, expected {ann}→{att}",
                    p.annotation_size(),
                    p.attention_size()
                )));
            }
            Ok(())
        };
        if self.embedding.dim() != self.hyper.embedding_dim {
            return Err(HanError::Config("embedding dimension does not match hyperparameters".into()));
        }
        check_gru("word_fwd", &self.word_fwd, self.hyper.embedding_dim)?;
        check_gru("word_bwd", &self.word_bwd, self.hyper.embedding_dim)?;
        check_attn("word_attn", &self.word_attn)?;
        check_gru("sent_fwd", &self.sent_fwd, ann)?;
        check_gru("sent_bwd", &self.sent_bwd, ann)?;
        check_attn("sent_attn", &self.sent_attn)?;
        match (self.variant, &self.article) {
            (Variant::V1, None) => {}
            (Variant::V2, Some(a)) => {
                check_gru("article.fwd", &a.fwd, ann)?;
                check_gru("article.bwd", &a.bwd, ann)?;
                match (&a.body, self.hyper.share_article_bigru) {
                    (None, true) => {}
                    (Some((f, b)), false) => {
                        check_gru("article.body_fwd", f, ann)?;
                        check_gru("article.body_bwd", b, ann)?;
                    }
                    _ => {
                        return Err(HanError::Config(
                            "article body BiGRU presence disagrees with share_article_bigru".into(),
                        ))
                    }
                }
                check_attn("article.attn", &a.attn)?;
            }
            (Variant::V1, Some(_)) => {
                return Err(HanError::Config("v1 model carries article-level parameters".into()))
            }
            (Variant::V2, None) => {
                return Err(HanError::Config("v2 model lacks article-level parameters".into()))
            }
        }
        if self.classifier.input_size() != ann {
            return Err(HanError::Config(format!(
                "classifier input {} does not match annotation size {ann}",
                self.classifier.input_size()
            )));
        }
        Ok(())
    }

    /// Every parameter tensor with a stable dotted name, in a fixed order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![("embedding".to_string(), &self.embedding.weights)];
        push_gru(&mut out, "word_fwd", &self.word_fwd);
        push_gru(&mut out, "word_bwd", &self.word_bwd);
        push_attn(&mut out, "word_attn", &self.word_attn);
        push_gru(&mut out, "sent_fwd", &self.sent_fwd);
        push_gru(&mut out, "sent_bwd", &self.sent_bwd);
        push_attn(&mut out, "sent_attn", &self.sent_attn);
        if let Some(a) = &self.article {
            push_gru(&mut out, "article.fwd", &a.fwd);
            push_gru(&mut out, "article.bwd", &a.bwd);
            if let Some((f, b)) = &a.body {
                push_gru(&mut out, "article.body_fwd", f);
                push_gru(&mut out, "article.body_bwd", b);
            }
            push_attn(&mut out, "article.attn", &a.attn);
        }
        for (n, t) in DENSE_TENSOR_NAMES.iter().zip(self.classifier.tensors()) {
            out.push((format!("classifier.{n}"), t));
        }
        out
    }

    /// Mutable counterpart of [`HanModel::named_tensors`], same order.
    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = vec![("embedding".to_string(), &mut self.embedding.weights)];
        push_gru_mut(&mut out, "word_fwd", &mut self.word_fwd);
        push_gru_mut(&mut out, "word_bwd", &mut self.word_bwd);
        push_attn_mut(&mut out, "word_attn", &mut self.word_attn);
        push_gru_mut(&mut out, "sent_fwd", &mut self.sent_fwd);
        push_gru_mut(&mut out, "sent_bwd", &mut self.sent_bwd);
        push_attn_mut(&mut out, "sent_attn", &mut self.sent_attn);
        if let Some(a) = &mut self.article {
            push_gru_mut(&mut out, "article.fwd", &mut a.fwd);
            push_gru_mut(&mut out, "article.bwd", &mut a.bwd);
            if let Some((f, b)) = &mut a.body {
                push_gru_mut(&mut out, "article.body_fwd", f);
                push_gru_mut(&mut out, "article.body_bwd", b);
            }
            push_attn_mut(&mut out, "article.attn", &mut a.attn);
        }
        for (n, t) in DENSE_TENSOR_NAMES.iter().zip(self.classifier.tensors_mut()) {
            out.push((format!("classifier.{n}"), t));
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

fn push_gru<'a>(out: &mut Vec<(String, &'a Tensor)>, prefix: &str, p: &'a GruParams) {
    for (n, t) in GRU_TENSOR_NAMES.iter().zip(p.tensors()) {
        out.push((format!("{prefix}.{n}"), t));
    }
}

fn push_attn<'a>(out: &mut Vec<(String, &'a Tensor)>, prefix: &str, p: &'a AttentionParams) {
    for (n, t) in ATTENTION_TENSOR_NAMES.iter().zip(p.tensors()) {
        out.push((format!("{prefix}.{n}"), t));
    }
}

fn push_gru_mut<'a>(out: &mut Vec<(String, &'a mut Tensor)>, prefix: &str, p: &'a mut GruParams) {
    for (n, t) in GRU_TENSOR_NAMES.iter().zip(p.tensors_mut()) {
        out.push((format!("{prefix}.{n}"), t));
    }
}

fn push_attn_mut<'a>(
    out: &mut Vec<(String, &'a mut Tensor)>,
    prefix: &str,
    p: &'a mut AttentionParams,
) {
    for (n, t) in ATTENTION_TENSOR_NAMES.iter().zip(p.tensors_mut()) {
        out.push((format!("{prefix}.{n}"), t));
    }
}

/// Gradients of the article-level parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct ArticleGrads {
    pub fwd: GruParams,
    pub bwd: GruParams,
    pub body: Option<(GruParams, GruParams)>,
    pub attn: AttentionParams,
}

/// Gradient set mirroring [`HanModel`]. The embedding gradient is sparse.
#[derive(Clone, Debug, PartialEq)]
pub struct HanGrads {
    pub embedding: EmbeddingGrad,
    pub embedding_dim: usize,
    pub word_fwd: GruParams,
    pub word_bwd: GruParams,
    pub word_attn: AttentionParams,
    pub sent_fwd: GruParams,
    pub sent_bwd: GruParams,
    pub sent_attn: AttentionParams,
    pub article: Option<ArticleGrads>,
    pub classifier: DenseParams,
}

/// Borrowed view of one gradient tensor.
pub enum GradView<'a> {
    Dense(&'a Tensor),
    /// Row-sparse embedding gradient; absent rows are zero.
    Rows(&'a EmbeddingGrad),
}

impl HanGrads {
    pub fn zeros_like(model: &HanModel) -> Self {
        HanGrads {
            embedding: EmbeddingGrad::default(),
            embedding_dim: model.embedding.dim(),
            word_fwd: model.word_fwd.zeros_like(),
            word_bwd: model.word_bwd.zeros_like(),
            word_attn: model.word_attn.zeros_like(),
            sent_fwd: model.sent_fwd.zeros_like(),
            sent_bwd: model.sent_bwd.zeros_like(),
            sent_attn: model.sent_attn.zeros_like(),
            article: model.article.as_ref().map(|a| ArticleGrads {
                fwd: a.fwd.zeros_like(),
                bwd: a.bwd.zeros_like(),
                body: a.body.as_ref().map(|(f, b)| (f.zeros_like(), b.zeros_like())),
                attn: a.attn.zeros_like(),
            }),
            classifier: model.classifier.zeros_like(),
        }
    }

    pub fn accumulate(&mut self, other: &HanGrads) {
        self.embedding.accumulate(&other.embedding);
        self.word_fwd.accumulate(&other.word_fwd);
        self.word_bwd.accumulate(&other.word_bwd);
        self.word_attn.accumulate(&other.word_attn);
        self.sent_fwd.accumulate(&other.sent_fwd);
        self.sent_bwd.accumulate(&other.sent_bwd);
        self.sent_attn.accumulate(&other.sent_attn);
        if let (Some(a), Some(b)) = (&mut self.article, &other.article) {
            a.fwd.accumulate(&b.fwd);
            a.bwd.accumulate(&b.bwd);
            if let (Some((af, ab)), Some((bf, bb))) = (&mut a.body, &b.body) {
                af.accumulate(bf);
                ab.accumulate(bb);
            }
            a.attn.accumulate(&b.attn);
        }
        self.classifier.accumulate(&other.classifier);
    }

    pub fn scale(&mut self, factor: f64) {
        self.embedding.scale(factor);
        self.word_fwd.scale(factor);
        self.word_bwd.scale(factor);
        self.word_attn.scale(factor);
        self.sent_fwd.scale(factor);
        self.sent_bwd.scale(factor);
        self.sent_attn.scale(factor);
        if let Some(a) = &mut self.article {
            a.fwd.scale(factor);
            a.bwd.scale(factor);
            if let Some((f, b)) = &mut a.body {
                f.scale(factor);
                b.scale(factor);
            }
            a.attn.scale(factor);
        }
        self.classifier.scale(factor);
    }

    /// Views in the same order and with the same names as
    /// [`HanModel::named_tensors`].
    pub fn named_views(&self) -> Vec<(String, GradView<'_>)> {
        let mut dense: Vec<(String, &Tensor)> = Vec::new();
        push_gru(&mut dense, "word_fwd", &self.word_fwd);
        push_gru(&mut dense, "word_bwd", &self.word_bwd);
        push_attn(&mut dense, "word_attn", &self.word_attn);
        push_gru(&mut dense, "sent_fwd", &self.sent_fwd);
        push_gru(&mut dense, "sent_bwd", &self.sent_bwd);
        push_attn(&mut dense, "sent_attn", &self.sent_attn);
        if let Some(a) = &self.article {
            push_gru(&mut dense, "article.fwd", &a.fwd);
            push_gru(&mut dense, "article.bwd", &a.bwd);
            if let Some((f, b)) = &a.body {
                push_gru(&mut dense, "article.body_fwd", f);
                push_gru(&mut dense, "article.body_bwd", b);
            }
            push_attn(&mut dense, "article.attn", &a.attn);
        }
        for (n, t) in DENSE_TENSOR_NAMES.iter().zip(self.classifier.tensors()) {
            dense.push((format!("classifier.{n}"), t));
        }
        let mut out = vec![("embedding".to_string(), GradView::Rows(&self.embedding))];
        out.extend(dense.into_iter().map(|(n, t)| (n, GradView::Dense(t))));
        out
    }

    /// Dense copy of the named gradient (embedding rows expanded).
    pub fn dense(&self, name: &str, model: &HanModel) -> Option<Tensor> {
        self.named_views().into_iter().find(|(n, _)| n == name).map(|(_, v)| match v {
            GradView::Dense(t) => t.clone(),
            GradView::Rows(rows) => {
                let mut t = Tensor::zeros(model.embedding.weights.shape());
                for (&id, g) in &rows.rows {
                    t.row_mut(id).copy_from_slice(g);
                }
                t
            }
        })
    }
}

use super::model::{ArticleEncoding, HanModel, Variant};
use super::trace::AttentionTrace;
use crate::data::TokenizedArticle;
use crate::error::{HanError, Result};
use crate::layers::{
    attention_forward, bigru_forward, dense_forward, embed_lookup, AttentionCache, BiGruCache,
    DenseCache, PAD_ID,
};
use crate::tensor::{dropout_mask, RngState, Tensor};

/// Forward-pass mode.
pub enum Mode<'a> {
    /// Inference: no caches, no dropout.
    Eval,
    /// Caches for backpropagation, no dropout (deterministic).
    Cached,
    /// Caches plus inverted dropout after every attention layer.
    Train(&'a mut RngState),
}

impl Mode<'_> {
    fn caching(&self) -> bool {
        !matches!(self, Mode::Eval)
    }

    fn dropout(&mut self, n: usize, rate: f64) -> Result<Option<Vec<f64>>> {
        match self {
            Mode::Train(rng) if rate > 0.0 => Ok(Some(dropout_mask(n, rate, rng)?.into_data())),
            _ => Ok(None),
        }
    }
}

fn apply_mask(v: &mut Tensor, mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        v.data_mut().iter_mut().zip(m).for_each(|(x, k)| *x *= k);
    }
}

#[derive(Clone, Debug)]
pub struct SentenceCache {
    pub(crate) ids: Vec<usize>,
    pub(crate) bigru: BiGruCache,
    pub(crate) attn: AttentionCache,
    pub(crate) dropout: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct SentenceEncoding {
    pub vector: Tensor,
    /// One weight per input position; PAD positions are exactly 0.
    pub weights: Vec<f64>,
    /// Weights of the non-PAD tokens only, in order.
    pub token_weights: Vec<f64>,
    pub cache: Option<SentenceCache>,
}

/// Embeds a sentence, runs the word BiGRU over its non-PAD tokens and pools
/// them with word attention. Input longer than `max_words_per_sentence` is
/// truncated to its head.
pub fn encode_sentence(model: &HanModel, token_ids: &[usize], mode: &mut Mode) -> Result<SentenceEncoding> {
    let ids = &token_ids[..token_ids.len().min(model.hyper.max_words_per_sentence)];
    let kept: Vec<usize> = ids.iter().copied().filter(|&id| id != PAD_ID).collect();
    if kept.is_empty() {
        return Err(HanError::Domain("sentence has no non-PAD tokens".into()));
    }
    let xs = embed_lookup(&model.embedding, &kept)?;
    let (ann, bigru) = bigru_forward(&model.word_fwd, &model.word_bwd, &xs)?;
    let out = attention_forward(&model.word_attn, &ann, None)?;
    let token_weights = out.weights.into_data();
    let mut weights = Vec::with_capacity(ids.len());
    let mut k = 0;
    for &id in ids {
        if id == PAD_ID {
            weights.push(0.0);
        } else {
            weights.push(token_weights[k]);
            k += 1;
        }
    }
    let mut vector = out.pooled;
    let dropout = mode.dropout(vector.len(), model.hyper.dropout_rate)?;
    apply_mask(&mut vector, &dropout);
    let cache = mode.caching().then(|| SentenceCache {
        ids: kept,
        bigru,
        attn: out.cache,
        dropout,
    });
    Ok(SentenceEncoding {
        vector,
        weights,
        token_weights,
        cache,
    })
}

#[derive(Clone, Debug)]
pub struct DocumentCache {
    pub(crate) sentences: Vec<SentenceCache>,
    pub(crate) bigru: BiGruCache,
    pub(crate) attn: AttentionCache,
    pub(crate) dropout: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct DocumentEncoding {
    pub vector: Tensor,
    /// Indices (into the input) of the sentences that were encoded.
    pub kept: Vec<usize>,
    pub sentence_weights: Vec<f64>,
    /// Per kept sentence, weights of its non-PAD tokens.
    pub word_weights: Vec<Vec<f64>>,
    pub cache: Option<DocumentCache>,
}

/// Encodes every sentence, runs the sentence BiGRU over the sentence vectors
/// and pools them with sentence attention. All-PAD sentences are treated as
/// padding and skipped; at most `max_sentences_per_doc` are read.
pub fn encode_document(model: &HanModel, sentences: &[Vec<usize>], mode: &mut Mode) -> Result<DocumentEncoding> {
    let limit = sentences.len().min(model.hyper.max_sentences_per_doc);
    let mut kept = Vec::new();
    let mut encoded = Vec::new();
    for (i, s) in sentences[..limit].iter().enumerate() {
        if s.iter().all(|&id| id == PAD_ID) {
            continue;
        }
        encoded.push(encode_sentence(model, s, mode)?);
        kept.push(i);
    }
    if encoded.is_empty() {
        return Err(HanError::Domain("document has no sentences".into()));
    }
    let rows: Vec<Vec<f64>> = encoded.iter().map(|e| e.vector.data().to_vec()).collect();
    let xs = Tensor::from_rows(&rows)?;
    let (ann, bigru) = bigru_forward(&model.sent_fwd, &model.sent_bwd, &xs)?;
    let out = attention_forward(&model.sent_attn, &ann, None)?;
    let mut vector = out.pooled;
    let dropout = mode.dropout(vector.len(), model.hyper.dropout_rate)?;
    apply_mask(&mut vector, &dropout);

    let word_weights = encoded.iter().map(|e| e.token_weights.clone()).collect();
    let cache = if mode.caching() {
        Some(DocumentCache {
            sentences: encoded.into_iter().map(|e| e.cache.expect("cached mode")).collect(),
            bigru,
            attn: out.cache,
            dropout,
        })
    } else {
        None
    };
    Ok(DocumentEncoding {
        vector,
        kept,
        sentence_weights: out.weights.into_data(),
        word_weights,
        cache,
    })
}

/// Which inputs fed the v2 article attention.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Part {
    Title,
    Body,
}

#[derive(Clone, Debug)]
pub enum ArticleCache {
    V1 {
        doc: DocumentCache,
        classifier: DenseCache,
    },
    V2 {
        title: Option<SentenceCache>,
        body: Option<DocumentCache>,
        parts: Vec<Part>,
        /// One cache per part (independent) or one shared (sequence).
        bigru: Vec<BiGruCache>,
        attn: AttentionCache,
        dropout: Option<Vec<f64>>,
        classifier: DenseCache,
    },
}

#[derive(Clone, Debug)]
pub struct ArticleForward {
    pub vector: Tensor,
    /// `[p_reliable, p_unreliable]`.
    pub probs: Tensor,
    pub trace: AttentionTrace,
    pub cache: Option<ArticleCache>,
}

impl ArticleForward {
    pub fn p_unreliable(&self) -> f64 {
        self.probs.data()[1]
    }
}

/// v1: the title becomes sentence 0 of the body document. The title always
/// survives truncation; the body keeps its first `max_sentences - 1`.
pub fn encode_article_v1(
    model: &HanModel,
    title: &[usize],
    body: &[Vec<usize>],
    mode: &mut Mode,
) -> Result<ArticleForward> {
    if model.variant != Variant::V1 {
        return Err(HanError::Config("encode_article_v1 called on a v2 model".into()));
    }
    let (doc_input, title_in_doc) = v1_document(model, title, body);
    let doc = encode_document(model, &doc_input, mode)?;
    let classifier = dense_forward(&model.classifier, &doc.vector)?;
    let trace = AttentionTrace {
        word_weights: doc.word_weights,
        sentence_weights: doc.sentence_weights,
        article_weights: None,
        title_word_weights: None,
        sentence_texts: Vec::new(),
        title_tokens: Vec::new(),
        title_in_document: title_in_doc && doc.kept.first() == Some(&0),
        sentence_index: doc.kept.clone(),
    };
    let probs = Tensor::vector(classifier.probs.clone());
    let cache = doc.cache.map(|doc| ArticleCache::V1 { doc, classifier });
    Ok(ArticleForward {
        vector: doc.vector,
        probs,
        trace,
        cache,
    })
}

/// The document v1 encodes: `[title] ++ body`, truncated so the title stays.
pub fn v1_document(model: &HanModel, title: &[usize], body: &[Vec<usize>]) -> (Vec<Vec<usize>>, bool) {
    let has_title = title.iter().any(|&id| id != PAD_ID);
    let max = model.hyper.max_sentences_per_doc;
    let mut doc = Vec::with_capacity(body.len() + 1);
    if has_title {
        doc.push(title.to_vec());
        doc.extend(body.iter().take(max - 1).cloned());
    } else {
        doc.extend(body.iter().take(max).cloned());
    }
    (doc, has_title)
}

/// v2: title through the sentence encoder, body through the document
/// encoder, both through the article BiGRU, then article attention.
pub fn encode_article_v2(
    model: &HanModel,
    title: &[usize],
    body: &[Vec<usize>],
    mode: &mut Mode,
) -> Result<ArticleForward> {
    let article = match (model.variant, &model.article) {
        (Variant::V2, Some(a)) => a,
        _ => return Err(HanError::Config("encode_article_v2 called on a v1 model".into())),
    };
    let has_title = title.iter().any(|&id| id != PAD_ID);
    let has_body = body.iter().any(|s| s.iter().any(|&id| id != PAD_ID));
    if !has_title && !has_body {
        return Err(HanError::Domain("article has neither title nor body".into()));
    }

    let mut parts = Vec::new();
    let mut inputs = Vec::new();
    let title_enc = if has_title {
        let e = encode_sentence(model, title, mode)?;
        parts.push(Part::Title);
        inputs.push(e.vector.data().to_vec());
        Some(e)
    } else {
        None
    };
    let body_enc = if has_body {
        let d = encode_document(model, body, mode)?;
        parts.push(Part::Body);
        inputs.push(d.vector.data().to_vec());
        Some(d)
    } else {
        None
    };

    let mut bigru_caches = Vec::new();
    let rows: Vec<Vec<f64>> = match model.hyper.article_encoding {
        ArticleEncoding::Independent => parts
            .iter()
            .zip(&inputs)
            .map(|(part, x)| {
                let (f, b) = match part {
                    Part::Title => (&article.fwd, &article.bwd),
                    Part::Body => article.body_bigru(),
                };
                let xs = Tensor::matrix(1, x.len(), x.clone())?;
                let (h, cache) = bigru_forward(f, b, &xs)?;
                bigru_caches.push(cache);
                Ok(h.into_data())
            })
            .collect::<Result<_>>()?,
        ArticleEncoding::Sequence => {
            let xs = Tensor::from_rows(&inputs)?;
            let (h, cache) = bigru_forward(&article.fwd, &article.bwd, &xs)?;
            bigru_caches.push(cache);
            (0..h.rows()).map(|t| h.row(t).to_vec()).collect()
        }
    };
    let stacked = Tensor::from_rows(&rows)?;
    let out = attention_forward(&article.attn, &stacked, None)?;
    let mut vector = out.pooled;
    let dropout = mode.dropout(vector.len(), model.hyper.dropout_rate)?;
    apply_mask(&mut vector, &dropout);
    let classifier = dense_forward(&model.classifier, &vector)?;

    let w = out.weights.data();
    let weight_of = |p: Part| parts.iter().position(|&q| q == p).map_or(0.0, |i| w[i]);
    let (word_weights, sentence_weights, sentence_index) = match &body_enc {
        Some(d) => (d.word_weights.clone(), d.sentence_weights.clone(), d.kept.clone()),
        None => (Vec::new(), Vec::new(), Vec::new()),
    };
    let trace = AttentionTrace {
        word_weights,
        sentence_weights,
        article_weights: Some((weight_of(Part::Title), weight_of(Part::Body))),
        title_word_weights: title_enc.as_ref().map(|e| e.token_weights.clone()),
        sentence_texts: Vec::new(),
        title_tokens: Vec::new(),
        title_in_document: false,
        sentence_index,
    };
    let probs = Tensor::vector(classifier.probs.clone());
    let cache = if mode.caching() {
        Some(ArticleCache::V2 {
            title: title_enc.and_then(|e| e.cache),
            body: body_enc.and_then(|d| d.cache),
            parts,
            bigru: bigru_caches,
            attn: out.cache,
            dropout,
            classifier,
        })
    } else {
        None
    };
    Ok(ArticleForward {
        vector,
        probs,
        trace,
        cache,
    })
}

/// Class probabilities `[p_reliable, p_unreliable]` for an article vector.
pub fn classify(model: &HanModel, v_article: &Tensor) -> Result<Tensor> {
    crate::layers::dense_softmax(&model.classifier, v_article)
}

impl HanModel {
    /// Runs the variant's article encoder and fills the trace's token texts.
    pub fn forward(&self, article: &TokenizedArticle, mode: &mut Mode) -> Result<ArticleForward> {
        let mut out = match self.variant {
            Variant::V1 => encode_article_v1(self, &article.title_ids, &article.body_ids, mode)?,
            Variant::V2 => encode_article_v2(self, &article.title_ids, &article.body_ids, mode)?,
        };
        out.trace.attach_tokens(self, article);
        Ok(out)
    }

    /// Probability that `article` is unreliable (evaluation mode).
    pub fn predict(&self, article: &TokenizedArticle) -> Result<f64> {
        Ok(self.forward(article, &mut Mode::Eval)?.p_unreliable())
    }
}

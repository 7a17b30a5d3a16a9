use serde::{Deserialize, Serialize};

use super::model::{HanModel, Variant};
use crate::data::TokenizedArticle;

/// Attention weights recorded while encoding one article.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttentionTrace {
    /// Per encoded sentence, one weight per (non-PAD) token.
    pub word_weights: Vec<Vec<f64>>,
    /// One weight per encoded sentence.
    pub sentence_weights: Vec<f64>,
    /// `(α_title, α_body)`; v2 only.
    pub article_weights: Option<(f64, f64)>,
    /// Word weights of the separately encoded title; v2 only.
    pub title_word_weights: Option<Vec<f64>>,
    /// Token strings indexed like `word_weights`.
    pub sentence_texts: Vec<Vec<String>>,
    /// Title token strings, indexed like `title_word_weights` (v2) or like
    /// sentence 0 (v1).
    pub title_tokens: Vec<String>,
    /// v1 only: sentence 0 of the document is the title.
    pub title_in_document: bool,
    /// Position of each encoded sentence in the encoder's input list.
    pub sentence_index: Vec<usize>,
}

impl AttentionTrace {
    pub(crate) fn attach_tokens(&mut self, model: &HanModel, article: &TokenizedArticle) {
        let max_words = model.hyper.max_words_per_sentence;
        let clip = |t: &[String]| t[..t.len().min(max_words)].to_vec();
        let title = clip(&article.title_tokens);
        let sources: Vec<&[String]> = match model.variant {
            Variant::V1 if self.title_in_document || !article.title_tokens.is_empty() => {
                std::iter::once(article.title_tokens.as_slice())
                    .chain(article.body_tokens.iter().map(Vec::as_slice))
                    .collect()
            }
            _ => article.body_tokens.iter().map(Vec::as_slice).collect(),
        };
        self.sentence_texts = self
            .sentence_index
            .iter()
            .map(|&i| sources.get(i).map_or_else(Vec::new, |t| clip(t)))
            .collect();
        self.title_tokens = title;
    }

    /// Every recorded weight vector, including the article pair.
    pub fn weight_vectors(&self) -> Vec<Vec<f64>> {
        let mut out = self.word_weights.clone();
        if !self.sentence_weights.is_empty() {
            out.push(self.sentence_weights.clone());
        }
        if let Some(t) = &self.title_word_weights {
            out.push(t.clone());
        }
        if let Some((a, b)) = self.article_weights {
            out.push(vec![a, b]);
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.sentence_weights.is_empty() && self.title_word_weights.is_none()
    }
}

use serde::{Deserialize, Serialize};

use super::dataset::{Article, Label};
use super::text::{split_sentences, tokenize_words};
use super::vocab::Vocabulary;
use crate::error::{HanError, Result};
use crate::layers::PAD_ID;

/// Sequence limits applied when indexing articles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceLimits {
    pub max_words: usize,
    pub max_sentences: usize,
}

/// Indexed article: title ids plus one id sequence per body sentence. The
/// token strings are kept alongside for visualization.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenizedArticle {
    pub uid: String,
    pub title_ids: Vec<usize>,
    pub body_ids: Vec<Vec<usize>>,
    pub title_tokens: Vec<String>,
    pub body_tokens: Vec<Vec<String>>,
    pub label: Label,
}

/// Tokenizes and indexes `article`, keeping the first `max_words` tokens of
/// every sentence and the first `max_sentences` body sentences.
pub fn tokenize_article(
    article: &Article,
    vocab: &Vocabulary,
    limits: SequenceLimits,
) -> Result<TokenizedArticle> {
    let mut title_tokens = tokenize_words(&article.title);
    title_tokens.truncate(limits.max_words);
    let mut body_tokens: Vec<Vec<String>> = split_sentences(article.body())
        .iter()
        .map(|s| {
            let mut t = tokenize_words(s);
            t.truncate(limits.max_words);
            t
        })
        .filter(|t| !t.is_empty())
        .collect();
    body_tokens.truncate(limits.max_sentences);
    if title_tokens.is_empty() && body_tokens.is_empty() {
        return Err(HanError::Validation(format!(
            "article {:?} has neither title nor body tokens",
            article.uid
        )));
    }
    let index = |toks: &[String]| toks.iter().map(|t| vocab.lookup(t)).collect::<Vec<_>>();
    Ok(TokenizedArticle {
        uid: article.uid.clone(),
        title_ids: index(&title_tokens),
        body_ids: body_tokens.iter().map(|s| index(s)).collect(),
        title_tokens,
        body_tokens,
        label: article.label,
    })
}

pub fn tokenize_all(
    articles: &[Article],
    vocab: &Vocabulary,
    limits: SequenceLimits,
) -> Result<Vec<TokenizedArticle>> {
    articles
        .iter()
        .map(|a| tokenize_article(a, vocab, limits))
        .collect()
}

/// Right-pads `ids` with PAD up to `len`.
pub fn pad_sentence(ids: &[usize], len: usize) -> Vec<usize> {
    let mut out = ids.to_vec();
    if out.len() < len {
        out.resize(len, PAD_ID);
    }
    out
}

/// Pads every sentence to `words` and appends all-PAD sentences up to
/// `sentences`.
pub fn pad_document(body: &[Vec<usize>], sentences: usize, words: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = body.iter().map(|s| pad_sentence(s, words)).collect();
    while out.len() < sentences {
        out.push(vec![PAD_ID; words]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::vocab::UNK_ID;
    use proptest::prelude::*;

    fn article(title: &str, text: &str) -> Article {
        Article {
            uid: "u1".into(),
            title: title.into(),
            text: text.into(),
            normalized_text: None,
            label: Label::Unreliable,
        }
    }

    fn vocab() -> Vocabulary {
        Vocabulary::from_tokens(["breaking", "!", "the", "bomber", ".", "news"]).unwrap()
    }

    const LIMITS: SequenceLimits = SequenceLimits {
        max_words: 64,
        max_sentences: 64,
    };

    #[test]
    fn known_sentence_hand_lookup() {
        let t = tokenize_article(&article("Breaking! The BOMBER", "The news. Zebra!"), &vocab(), LIMITS)
            .unwrap();
        assert_eq!(t.title_ids, vec![2, 3, 4, 5]);
        assert_eq!(t.body_ids, vec![vec![4, 7, 6], vec![UNK_ID, 3]]);
        assert_eq!(t.body_tokens[1], vec!["zebra", "!"]);
    }

    #[test]
    fn title_only_article() {
        let t = tokenize_article(&article("Breaking news", ""), &vocab(), LIMITS).unwrap();
        assert!(t.body_ids.is_empty());
        assert_eq!(t.title_ids.len(), 2);
    }

    #[test]
    fn empty_article_rejected() {
        assert!(matches!(
            tokenize_article(&article("  ", " "), &vocab(), LIMITS),
            Err(HanError::Validation(_))
        ));
    }

    #[test]
    fn prefers_normalized_text() {
        let mut a = article("x", "Raw body.");
        a.normalized_text = Some("the news.".into());
        let t = tokenize_article(&a, &vocab(), LIMITS).unwrap();
        assert_eq!(t.body_tokens, vec![vec!["the", "news", "."]]);
    }

    #[test]
    fn padding_helpers() {
        assert_eq!(pad_sentence(&[3, 4], 4), vec![3, 4, 0, 0]);
        assert_eq!(pad_document(&[vec![5]], 2, 3), vec![vec![5, 0, 0], vec![0, 0, 0]]);
    }

    proptest! {
        #[test]
        fn structural_bounds_hold(
            title in "[a-zA-Z!. ]{0,40}",
            body in "[a-zA-Z!?. ]{1,200}",
            max_words in 1usize..6,
            max_sentences in 1usize..4,
        ) {
            let v = vocab();
            let limits = SequenceLimits { max_words, max_sentences };
            if let Ok(t) = tokenize_article(&article(&title, &body), &v, limits) {
                prop_assert!(t.title_ids.len() <= max_words);
                prop_assert!(t.body_ids.len() <= max_sentences);
                for s in &t.body_ids {
                    prop_assert!(!s.is_empty() && s.len() <= max_words);
                    prop_assert!(s.iter().all(|&id| id < v.size()));
                }
                prop_assert!(t.title_ids.iter().all(|&id| id < v.size()));
            }
        }
    }
}

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::dataset::Article;
use super::text::{split_sentences, tokenize_words};
use crate::error::{HanError, Result};
use crate::layers::PAD_ID;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const UNK_ID: usize = 1;
pub const RESERVED: usize = 2;
pub const DEFAULT_MAX_VOCAB: usize = 65_510;

/// Bijective token/id mapping with PAD = 0 and UNK = 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Vocabulary {
    /// Builds a vocabulary from non-reserved tokens in id order (first token
    /// gets id 2).
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocabulary {
            token_to_id: HashMap::new(),
            id_to_token: Vec::new(),
        };
        for t in [PAD_TOKEN, UNK_TOKEN] {
            v.token_to_id.insert(t.to_string(), v.id_to_token.len());
            v.id_to_token.push(t.to_string());
        }
        for tok in tokens {
            let tok = tok.into();
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(HanError::Validation(format!(
                    "vocabulary token {tok:?} is empty or contains whitespace"
                )));
            }
            if v.token_to_id.contains_key(&tok) {
                return Err(HanError::Validation(format!("duplicate vocabulary token {tok:?}")));
            }
            v.token_to_id.insert(tok.clone(), v.id_to_token.len());
            v.id_to_token.push(tok);
        }
        Ok(v)
    }

    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.token_to_id.get(token).copied()
    }

    /// Id of `token`, or UNK.
    pub fn lookup(&self, token: &str) -> usize {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    /// Non-reserved tokens in id order.
    pub fn tokens(&self) -> &[String] {
        &self.id_to_token[RESERVED..]
    }

    /// Hex SHA-256 over the full id-ordered token list.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for t in &self.id_to_token {
            hasher.update(t.as_bytes());
            hasher.update(b"\n");
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// One token per line; line `n` (0-based) holds id `n + 2`.
    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        for t in self.tokens() {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn parse_file(text: &str) -> Result<Self> {
        let mut tokens = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() || line == PAD_TOKEN || line == UNK_TOKEN {
                return Err(HanError::Parse {
                    line: i + 1,
                    message: format!("invalid vocabulary entry {line:?}"),
                });
            }
            tokens.push(line.to_string());
        }
        Vocabulary::from_tokens(tokens).map_err(|e| HanError::Parse {
            line: 0,
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_file_string()).map_err(|e| HanError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| HanError::io(path, e))?;
        Vocabulary::parse_file(&text)
    }
}

const _: () = assert!(PAD_ID == 0);

/// Title and body tokens of one article.
pub fn article_tokens(article: &Article) -> impl Iterator<Item = String> + '_ {
    tokenize_words(&article.title)
        .into_iter()
        .chain(split_sentences(article.body()).into_iter().flat_map(|s| tokenize_words(&s)))
}

/// Token frequencies over titles and bodies.
pub fn token_counts(articles: &[Article]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for a in articles {
        for t in article_tokens(a) {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    counts
}

/// Keeps the `max_size` most frequent tokens, ties broken lexicographically.
pub fn build_vocab(articles: &[Article], max_size: usize) -> Result<Vocabulary> {
    let counts = token_counts(articles);
    if counts.is_empty() {
        return Err(HanError::Domain("cannot build a vocabulary from an empty corpus".into()));
    }
    vocab_from_counts(&counts, max_size)
}

pub fn vocab_from_counts(counts: &BTreeMap<String, usize>, max_size: usize) -> Result<Vocabulary> {
    let mut ranked: Vec<(&String, &usize)> = counts
        .iter()
        .filter(|(t, _)| t.as_str() != PAD_TOKEN && t.as_str() != UNK_TOKEN)
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
    Vocabulary::from_tokens(ranked.into_iter().take(max_size).map(|(t, _)| t.clone()))
}

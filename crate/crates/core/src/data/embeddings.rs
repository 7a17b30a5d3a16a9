use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::vocab::{Vocabulary, RESERVED};
use crate::error::{HanError, Result};
use crate::layers::EmbeddingMatrix;
use crate::tensor::{RngState, Tensor};

pub const DEFAULT_EMBEDDING_DIM: usize = 100;
/// Out-of-vocabulary rows are drawn uniformly from `[-OOV_INIT, OOV_INIT]`.
pub const OOV_INIT: f64 = 0.05;

/// Word vectors read from a GloVe-style text file.
#[derive(Clone, Debug, PartialEq)]
pub struct PretrainedEmbeddings {
    pub dimension: usize,
    pub token_to_vector: HashMap<String, Vec<f64>>,
}

pub fn load_pretrained(path: &Path) -> Result<PretrainedEmbeddings> {
    let text = fs::read_to_string(path).map_err(|e| HanError::io(path, e))?;
    parse_pretrained(&text)
}

/// Parses `token v1 v2 ... vd` lines; `d` is fixed by the first line.
pub fn parse_pretrained(text: &str) -> Result<PretrainedEmbeddings> {
    let mut dimension = None;
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().expect("nonblank line has a field");
        let values = parts
            .map(|p| {
                p.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| HanError::Parse {
                        line: line_no,
                        message: format!("bad float {p:?}"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        let d = *dimension.get_or_insert(values.len());
        if values.is_empty() || values.len() != d {
            return Err(HanError::Parse {
                line: line_no,
                message: format!("expected {d} values, found {}", values.len()),
            });
        }
        map.insert(token.to_string(), values);
    }
    let Some(dimension) = dimension else {
        return Err(HanError::Parse {
            line: 0,
            message: "empty embeddings file; cannot infer dimension".into(),
        });
    };
    Ok(PretrainedEmbeddings {
        dimension,
        token_to_vector: map,
    })
}

/// Embedding matrix for `vocab`: pretrained rows copied, the rest uniform in
/// `[-0.05, 0.05]`, PAD row zero.
pub fn build_embedding_matrix(
    vocab: &Vocabulary,
    pretrained: Option<&PretrainedEmbeddings>,
    dim: usize,
    rng: &mut RngState,
) -> Result<EmbeddingMatrix> {
    if let Some(p) = pretrained {
        if p.dimension != dim {
            return Err(HanError::Config(format!(
                "pretrained embeddings have dimension {}, model expects {dim}",
                p.dimension
            )));
        }
    }
    if dim == 0 {
        return Err(HanError::Config("embedding dimension must be ≥ 1".into()));
    }
    let mut data = vec![0.0; vocab.size() * dim];
    for id in 1..vocab.size() {
        let row = &mut data[id * dim..(id + 1) * dim];
        let hit = if id >= RESERVED {
            pretrained.and_then(|p| p.token_to_vector.get(vocab.token(id).unwrap()))
        } else {
            None
        };
        match hit {
            Some(v) => row.copy_from_slice(v),
            None => row.iter_mut().for_each(|x| *x = rng.uniform(-OOV_INIT, OOV_INIT)),
        }
    }
    EmbeddingMatrix::new(Tensor::matrix(vocab.size(), dim, data)?, true)
}

use std::collections::BTreeMap;

use crate::error::{HanError, Result};
use crate::tensor::{axpy, Tensor};

/// Id reserved for padding; its embedding row is pinned to zero.
pub const PAD_ID: usize = 0;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    pub weights: Tensor,
    pub trainable: bool,
}

impl EmbeddingMatrix {
    /// Wraps a `V×d` matrix, zeroing the PAD row.
    pub fn new(mut weights: Tensor, trainable: bool) -> Result<Self> {
        if weights.shape().len() != 2 || weights.rows() == 0 || weights.cols() == 0 {
            return Err(HanError::Domain(format!(
                "embedding matrix must be a nonempty V×d matrix, got {:?}",
                weights.shape()
            )));
        }
        weights.row_mut(PAD_ID).fill(0.0);
        Ok(EmbeddingMatrix { weights, trainable })
    }

    pub fn vocab_size(&self) -> usize {
        self.weights.rows()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }
}

/// Sparse row gradient of an embedding matrix. Only rows that were looked up
/// appear; the PAD row never does.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmbeddingGrad {
    pub rows: BTreeMap<usize, Vec<f64>>,
}

impl EmbeddingGrad {
    pub fn accumulate(&mut self, other: &EmbeddingGrad) {
        for (&id, g) in &other.rows {
            match self.rows.get_mut(&id) {
                Some(acc) => axpy(1.0, g, acc),
                None => {
                    self.rows.insert(id, g.clone());
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.rows.values_mut() {
            g.iter_mut().for_each(|x| *x *= factor);
        }
    }

    /// Gradient for row `id`, or `None` if the row received no gradient.
    pub fn row(&self, id: usize) -> Option<&[f64]> {
        self.rows.get(&id).map(Vec::as_slice)
    }
}

/// Gathers the embedding rows for `token_ids` into a `T×d` matrix.
pub fn embed_lookup(e: &EmbeddingMatrix, token_ids: &[usize]) -> Result<Tensor> {
    let d = e.dim();
    let mut data = Vec::with_capacity(token_ids.len() * d);
    for (position, &id) in token_ids.iter().enumerate() {
        if id >= e.vocab_size() {
            return Err(HanError::Index {
                position,
                id,
                size: e.vocab_size(),
            });
        }
        data.extend_from_slice(e.weights.row(id));
    }
    Tensor::matrix(token_ids.len(), d, data)
}

/// Scatters `d_out` (T×d) back onto the looked-up rows. PAD positions and
/// frozen embeddings receive nothing.
pub fn embed_backward(
    e: &EmbeddingMatrix,
    token_ids: &[usize],
    d_out: &Tensor,
    grads: &mut EmbeddingGrad,
) -> Result<()> {
    if d_out.shape() != [token_ids.len(), e.dim()] {
        return Err(HanError::dim("embed_backward", d_out.shape(), &[token_ids.len(), e.dim()]));
    }
    if !e.trainable {
        return Ok(());
    }
    for (t, &id) in token_ids.iter().enumerate() {
        if id == PAD_ID {
            continue;
        }
        let row = grads.rows.entry(id).or_insert_with(|| vec![0.0; e.dim()]);
        axpy(1.0, d_out.row(t), row);
    }
    Ok(())
}

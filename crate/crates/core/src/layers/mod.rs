//! Learnable layers and their hand-derived backward passes.
//!
//! Each forward function returns (or can return) a cache that the matching
//! `*_backward` consumes. Gradient bundles reuse the parameter structs, so a
//! gradient always has exactly the shapes of the parameters it belongs to.

mod attention;
mod container;
mod dense;
mod embedding;
mod gru;

pub use attention::{
    attention_backward, attention_forward, attention_pool, AttentionCache, AttentionGrads,
    AttentionOutput, AttentionParams, ATTENTION_TENSOR_NAMES,
};
pub use container::{TensorContainer, CONTAINER_FORMAT_VERSION, CONTAINER_MAGIC};
pub use dense::{
    dense_backward, dense_backward_logits, dense_forward, dense_softmax, DenseCache, DenseGrads,
    DenseParams, DENSE_TENSOR_NAMES, NUM_CLASSES,
};
pub use embedding::{embed_backward, embed_lookup, EmbeddingGrad, EmbeddingMatrix, PAD_ID};
pub use gru::{
    bigru_backward, bigru_forward, gru_step, gru_step_backward, gru_step_forward, BiGruCache, GruGrads, GruParams,
    GruStepCache, GRU_TENSOR_NAMES,
};

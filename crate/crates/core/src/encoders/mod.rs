//! Word, sentence and article encoders and the two model variants.

mod backward;
mod forward;
mod io;
mod model;
mod trace;

pub use backward::model_backward;
pub use forward::{
    classify, encode_article_v1, encode_article_v2, encode_document, encode_sentence, v1_document,
    ArticleCache, ArticleForward, DocumentCache, Part, DocumentEncoding, Mode, SentenceCache, SentenceEncoding,
};
pub use io::{load_model, manifest_path, model_from_container, model_to_container, save_model, ModelManifest};
pub use model::{
    ArticleEncoding, ArticleGrads, ArticleParams, GradView, HanGrads, HanModel, HyperParams, Variant,
};
pub use trace::AttentionTrace;

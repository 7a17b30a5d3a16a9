use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::model::{ArticleParams, HanModel, HyperParams, Variant};
use crate::data::Vocabulary;
use crate::error::{HanError, Result};
use crate::layers::{
    AttentionParams, DenseParams, EmbeddingMatrix, GruParams, TensorContainer, ATTENTION_TENSOR_NAMES,
    DENSE_TENSOR_NAMES, GRU_TENSOR_NAMES,
};

/// Topology stored in the container header and in the sidecar manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub variant: Variant,
    pub hyper: HyperParams,
    pub vocab_size: usize,
    /// SHA-256 of the vocabulary file the model was trained with.
    pub vocab_fingerprint: String,
    pub embedding_trainable: bool,
    pub parameter_count: usize,
}

impl ModelManifest {
    pub fn describe(model: &HanModel, vocab: &Vocabulary) -> Self {
        ModelManifest {
            variant: model.variant,
            hyper: model.hyper,
            vocab_size: vocab.size(),
            vocab_fingerprint: vocab.fingerprint(),
            embedding_trainable: model.embedding.trainable,
            parameter_count: model.parameter_count(),
        }
    }

    /// Fails unless `vocab` is the vocabulary recorded here.
    pub fn check_vocab(&self, vocab: &Vocabulary) -> Result<()> {
        if vocab.size() != self.vocab_size || vocab.fingerprint() != self.vocab_fingerprint {
            return Err(HanError::Validation(format!(
                "vocabulary mismatch: model expects {} tokens with fingerprint {}, got {} tokens with {}",
                self.vocab_size,
                self.vocab_fingerprint,
                vocab.size(),
                vocab.fingerprint()
            )));
        }
        Ok(())
    }
}

/// `model.hanf` → `model.manifest.json`.
pub fn manifest_path(model_path: &Path) -> PathBuf {
    model_path.with_extension("manifest.json")
}

pub fn model_to_container(model: &HanModel, vocab: &Vocabulary) -> Result<TensorContainer> {
    if vocab.size() != model.vocab_size() {
        return Err(HanError::Validation(format!(
            "vocabulary has {} entries but the embedding matrix has {} rows",
            vocab.size(),
            model.vocab_size()
        )));
    }
    let manifest = ModelManifest::describe(model, vocab);
    let topology = serde_json::to_value(&manifest).map_err(|e| HanError::Format(e.to_string()))?;
    let mut c = TensorContainer::new(topology);
    for (name, t) in model.named_tensors() {
        c.push(name, t.clone());
    }
    Ok(c)
}

pub fn model_from_container(mut c: TensorContainer) -> Result<(HanModel, ModelManifest)> {
    let manifest: ModelManifest =
        serde_json::from_value(c.topology.clone()).map_err(|e| HanError::Format(format!("bad topology: {e}")))?;
    manifest.hyper.validate()?;
    let embedding = EmbeddingMatrix::new(c.take("embedding")?, manifest.embedding_trainable)?;
    let gru = |c: &mut TensorContainer, prefix: &str| -> Result<GruParams> {
        let mut ts = Vec::with_capacity(9);
        for n in GRU_TENSOR_NAMES {
            ts.push(c.take(&format!("{prefix}.{n}"))?);
        }
        GruParams::from_tensors(ts.try_into().expect("nine names"))
    };
    let attn = |c: &mut TensorContainer, prefix: &str| -> Result<AttentionParams> {
        let [a, b, d] = ATTENTION_TENSOR_NAMES.map(|n| format!("{prefix}.{n}"));
        AttentionParams::from_tensors([c.take(&a)?, c.take(&b)?, c.take(&d)?])
    };
    let word_fwd = gru(&mut c, "word_fwd")?;
    let word_bwd = gru(&mut c, "word_bwd")?;
    let word_attn = attn(&mut c, "word_attn")?;
    let sent_fwd = gru(&mut c, "sent_fwd")?;
    let sent_bwd = gru(&mut c, "sent_bwd")?;
    let sent_attn = attn(&mut c, "sent_attn")?;
    let article = match manifest.variant {
        Variant::V1 => None,
        Variant::V2 => {
            let fwd = gru(&mut c, "article.fwd")?;
            let bwd = gru(&mut c, "article.bwd")?;
            let body = if manifest.hyper.share_article_bigru {
                None
            } else {
                Some((gru(&mut c, "article.body_fwd")?, gru(&mut c, "article.body_bwd")?))
            };
            let attn = attn(&mut c, "article.attn")?;
            Some(ArticleParams { fwd, bwd, body, attn })
        }
    };
    let [w, b] = DENSE_TENSOR_NAMES.map(|n| format!("classifier.{n}"));
    let classifier = DenseParams::from_tensors([c.take(&w)?, c.take(&b)?])?;
    if let Some((name, _)) = c.tensors.first() {
        return Err(HanError::Format(format!("unexpected tensor {name:?} in model file")));
    }
    let model = HanModel {
        variant: manifest.variant,
        hyper: manifest.hyper,
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
    if model.vocab_size() != manifest.vocab_size {
        return Err(HanError::Format(format!(
            "embedding has {} rows, manifest says {}",
            model.vocab_size(),
            manifest.vocab_size
        )));
    }
    for (name, t) in model.named_tensors() {
        if !t.is_finite() {
            return Err(HanError::NonFinite(format!("tensor {name} in model file")));
        }
    }
    Ok((model, manifest))
}

/// Writes the parameter container and its JSON manifest next to it.
pub fn save_model(model: &HanModel, vocab: &Vocabulary, path: &Path) -> Result<ModelManifest> {
    let c = model_to_container(model, vocab)?;
    c.write(path)?;
    let manifest = ModelManifest::describe(model, vocab);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| HanError::Format(e.to_string()))?;
    let mp = manifest_path(path);
    fs::write(&mp, json + "\n").map_err(|e| HanError::io(mp, e))?;
    Ok(manifest)
}

/// Reads a model written by [`save_model`]. The container header is the
/// source of truth; the sidecar manifest is informational.
pub fn load_model(path: &Path) -> Result<(HanModel, ModelManifest)> {
    model_from_container(TensorContainer::read(path)?)
}

use super::forward::{ArticleCache, ArticleForward, DocumentCache, Part, SentenceCache};
use super::model::{ArticleEncoding, HanGrads, HanModel};
use crate::error::{HanError, Result};
use crate::layers::{attention_backward, bigru_backward, dense_backward_logits, embed_backward};
use crate::tensor::Tensor;

fn unmask(d: &mut [f64], mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        d.iter_mut().zip(m).for_each(|(x, k)| *x *= k);
    }
}

fn sentence_backward(
    model: &HanModel,
    cache: &SentenceCache,
    d_vector: &[f64],
    grads: &mut HanGrads,
) -> Result<()> {
    let mut d = d_vector.to_vec();
    unmask(&mut d, &cache.dropout);
    let d_ann = attention_backward(&model.word_attn, &cache.attn, &d, &mut grads.word_attn)?;
    let d_xs = bigru_backward(
        &model.word_fwd,
        &model.word_bwd,
        &cache.bigru,
        &d_ann,
        &mut grads.word_fwd,
        &mut grads.word_bwd,
    )?;
    embed_backward(&model.embedding, &cache.ids, &d_xs, &mut grads.embedding)
}

fn document_backward(
    model: &HanModel,
    cache: &DocumentCache,
    d_vector: &[f64],
    grads: &mut HanGrads,
) -> Result<()> {
    let mut d = d_vector.to_vec();
    unmask(&mut d, &cache.dropout);
    let d_ann = attention_backward(&model.sent_attn, &cache.attn, &d, &mut grads.sent_attn)?;
    let d_sentences = bigru_backward(
        &model.sent_fwd,
        &model.sent_bwd,
        &cache.bigru,
        &d_ann,
        &mut grads.sent_fwd,
        &mut grads.sent_bwd,
    )?;
    for (j, sc) in cache.sentences.iter().enumerate() {
        sentence_backward(model, sc, d_sentences.row(j), grads)?;
    }
    Ok(())
}

/// Gradient of the loss with respect to every model parameter, given the
/// gradient on the classifier's pre-softmax logits.
pub fn model_backward(model: &HanModel, forward: &ArticleForward, d_logits: &[f64]) -> Result<HanGrads> {
    let cache = forward
        .cache
        .as_ref()
        .ok_or_else(|| HanError::State("backward called without a cached forward pass".into()))?;
    if d_logits.len() != crate::layers::NUM_CLASSES {
        return Err(HanError::dim("model_backward", &[d_logits.len()], &[crate::layers::NUM_CLASSES]));
    }
    let mut grads = HanGrads::zeros_like(model);
    match cache {
        ArticleCache::V1 { doc, classifier } => {
            let d_v = dense_backward_logits(&model.classifier, classifier, d_logits, &mut grads.classifier);
            document_backward(model, doc, &d_v, &mut grads)?;
        }
        ArticleCache::V2 {
            title,
            body,
            parts,
            bigru,
            attn,
            dropout,
            classifier,
        } => {
            let article = model
                .article
                .as_ref()
                .ok_or_else(|| HanError::State("v2 cache on a model without article parameters".into()))?;
            let mut d_v = dense_backward_logits(&model.classifier, classifier, d_logits, &mut grads.classifier);
            unmask(&mut d_v, dropout);
            let ag = grads.article.as_mut().expect("v2 gradients carry article entries");
            let d_rows = attention_backward(&article.attn, attn, &d_v, &mut ag.attn)?;

            let d_inputs: Vec<Vec<f64>> = match model.hyper.article_encoding {
                ArticleEncoding::Independent => parts
                    .iter()
                    .enumerate()
                    .map(|(i, part)| {
                        let d_out = Tensor::matrix(1, d_rows.cols(), d_rows.row(i).to_vec())?;
                        let dx = match (part, &article.body, &mut ag.body) {
                            (Part::Body, Some((f, b)), Some((gf, gb))) => {
                                bigru_backward(f, b, &bigru[i], &d_out, gf, gb)?
                            }
                            _ => bigru_backward(
                                &article.fwd,
                                &article.bwd,
                                &bigru[i],
                                &d_out,
                                &mut ag.fwd,
                                &mut ag.bwd,
                            )?,
                        };
                        Ok(dx.into_data())
                    })
                    .collect::<Result<_>>()?,
                ArticleEncoding::Sequence => {
                    let dx = bigru_backward(&article.fwd, &article.bwd, &bigru[0], &d_rows, &mut ag.fwd, &mut ag.bwd)?;
                    (0..dx.rows()).map(|t| dx.row(t).to_vec()).collect()
                }
            };
            for (part, d) in parts.iter().zip(&d_inputs) {
                match part {
                    Part::Title => {
                        let c = title.as_ref().ok_or_else(|| HanError::State("missing title cache".into()))?;
                        sentence_backward(model, c, d, &mut grads)?;
                    }
                    Part::Body => {
                        let c = body.as_ref().ok_or_else(|| HanError::State("missing body cache".into()))?;
                        document_backward(model, c, d, &mut grads)?;
                    }
                }
            }
        }
    }
    Ok(grads)
}

use crate::error::{HanError, Result};
use crate::tensor::{add_outer, axpy, dot, glorot_init, matvec_into, matvec_t_acc, softmax_slice, RngState, Tensor};

/// Single-context-vector attention:
/// `u_t = tanh(w_proj a_t + b_proj)`, `α = softmax(u_t · context)`,
/// `pooled = Σ α_t a_t`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams {
    pub w_proj: Tensor,
    pub b_proj: Tensor,
    pub context: Tensor,
}

pub type AttentionGrads = AttentionParams;

pub const ATTENTION_TENSOR_NAMES: [&str; 3] = ["w_proj", "b_proj", "context"];

impl AttentionParams {
    pub fn zeros(annotation: usize, attention: usize) -> Self {
        AttentionParams {
            w_proj: Tensor::zeros(&[attention, annotation]),
            b_proj: Tensor::zeros(&[attention]),
            context: Tensor::zeros(&[attention]),
        }
    }

    /// Glorot projection, zero bias, random context vector with nonzero norm.
    pub fn init(annotation: usize, attention: usize, rng: &mut RngState) -> Result<Self> {
        let w_proj = glorot_init(attention, annotation, rng)?;
        let context = loop {
            let c = glorot_init(attention, 1, rng)?;
            if c.data().iter().any(|&v| v != 0.0) {
                break Tensor::vector(c.into_data());
            }
        };
        Ok(AttentionParams {
            w_proj,
            b_proj: Tensor::zeros(&[attention]),
            context,
        })
    }

    pub fn zeros_like(&self) -> Self {
        AttentionParams::zeros(self.annotation_size(), self.attention_size())
    }

    pub fn annotation_size(&self) -> usize {
        self.w_proj.cols()
    }

    pub fn attention_size(&self) -> usize {
        self.w_proj.rows()
    }

    pub fn tensors(&self) -> [&Tensor; 3] {
        [&self.w_proj, &self.b_proj, &self.context]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 3] {
        [&mut self.w_proj, &mut self.b_proj, &mut self.context]
    }

    pub fn from_tensors(t: [Tensor; 3]) -> Result<Self> {
        let [w_proj, b_proj, context] = t;
        let p = AttentionParams {
            w_proj,
            b_proj,
            context,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.w_proj.rows();
        if self.w_proj.shape().len() != 2 {
            return Err(HanError::dim("attention w_proj", self.w_proj.shape(), &[a, 0]));
        }
        if self.b_proj.shape() != [a] {
            return Err(HanError::dim("attention b_proj", self.b_proj.shape(), &[a]));
        }
        if self.context.shape() != [a] {
            return Err(HanError::dim("attention context", self.context.shape(), &[a]));
        }
        Ok(())
    }

    pub fn accumulate(&mut self, other: &AttentionParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            axpy(1.0, b.data(), a.data_mut());
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.tensors_mut().into_iter().for_each(|t| t.scale(factor));
    }
}

#[derive(Clone, Debug)]
pub struct AttentionCache {
    annotations: Tensor,
    projected: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct AttentionOutput {
    pub pooled: Tensor,
    pub weights: Tensor,
    pub cache: AttentionCache,
}

/// Attention pooling over the rows of `annotations` (T×D).
pub fn attention_pool(p: &AttentionParams, annotations: &Tensor) -> Result<(Tensor, Tensor)> {
    let out = attention_forward(p, annotations, None)?;
    Ok((out.pooled, out.weights))
}

/// Attention pooling with an optional keep-mask. Masked rows get weight
/// exactly zero and the rest renormalize.
pub fn attention_forward(
    p: &AttentionParams,
    annotations: &Tensor,
    mask: Option<&[bool]>,
) -> Result<AttentionOutput> {
    if annotations.shape().len() != 2 || annotations.rows() == 0 {
        return Err(HanError::Domain(format!(
            "attention over an empty annotation set {:?}",
            annotations.shape()
        )));
    }
    if annotations.cols() != p.annotation_size() {
        return Err(HanError::dim(
            "attention_pool",
            annotations.shape(),
            &[annotations.rows(), p.annotation_size()],
        ));
    }
    let t_len = annotations.rows();
    if let Some(m) = mask {
        if m.len() != t_len {
            return Err(HanError::dim("attention mask", &[m.len()], &[t_len]));
        }
    }
    let keep = |t: usize| mask.map_or(true, |m| m[t]);
    let kept: Vec<usize> = (0..t_len).filter(|&t| keep(t)).collect();
    if kept.is_empty() {
        return Err(HanError::Domain("attention with every position masked".into()));
    }

    let a = p.attention_size();
    let mut projected = vec![Vec::new(); t_len];
    let mut scores = Vec::with_capacity(kept.len());
    for &t in &kept {
        let mut u = vec![0.0; a];
        matvec_into(&p.w_proj, annotations.row(t), &mut u);
        for (ui, bi) in u.iter_mut().zip(p.b_proj.data()) {
            *ui = (*ui + bi).tanh();
        }
        scores.push(dot(&u, p.context.data()));
        projected[t] = u;
    }
    let kept_weights = softmax_slice(&scores);
    let mut weights = vec![0.0; t_len];
    for (&t, w) in kept.iter().zip(kept_weights) {
        weights[t] = w;
    }
    let mut pooled = vec![0.0; annotations.cols()];
    for &t in &kept {
        axpy(weights[t], annotations.row(t), &mut pooled);
    }
    Ok(AttentionOutput {
        pooled: Tensor::vector(pooled),
        weights: Tensor::vector(weights.clone()),
        cache: AttentionCache {
            annotations: annotations.clone(),
            projected,
            weights,
        },
    })
}

/// Backward pass; accumulates into `grads` and returns `d_annotations`.
pub fn attention_backward(
    p: &AttentionParams,
    cache: &AttentionCache,
    d_pooled: &[f64],
    grads: &mut AttentionGrads,
) -> Result<Tensor> {
    let ann = &cache.annotations;
    if d_pooled.len() != ann.cols() {
        return Err(HanError::dim("attention_backward", &[d_pooled.len()], &[ann.cols()]));
    }
    let t_len = ann.rows();
    let d_alpha: Vec<f64> = (0..t_len)
        .map(|t| if cache.weights[t] > 0.0 { dot(d_pooled, ann.row(t)) } else { 0.0 })
        .collect();
    let mean: f64 = cache.weights.iter().zip(&d_alpha).map(|(w, d)| w * d).sum();

    let mut d_ann = Tensor::zeros(ann.shape());
    for t in 0..t_len {
        let w = cache.weights[t];
        if w == 0.0 {
            continue;
        }
        let d_score = w * (d_alpha[t] - mean);
        let u = &cache.projected[t];
        axpy(d_score, u, grads.context.data_mut());
        let d_pre: Vec<f64> = u
            .iter()
            .zip(p.context.data())
            .map(|(ui, ci)| d_score * ci * (1.0 - ui * ui))
            .collect();
        add_outer(&mut grads.w_proj, &d_pre, ann.row(t));
        axpy(1.0, &d_pre, grads.b_proj.data_mut());
        let row = d_ann.row_mut(t);
        axpy(w, d_pooled, row);
        matvec_t_acc(&p.w_proj, &d_pre, row);
    }
    Ok(d_ann)
}

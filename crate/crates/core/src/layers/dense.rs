use crate::error::{HanError, Result};
use crate::tensor::{add_outer, axpy, matvec_into, matvec_t_acc, softmax_slice, RngState, Tensor, glorot_init};

/// Number of output classes: reliable (0) and unreliable (1).
pub const NUM_CLASSES: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams {
    pub weights: Tensor,
    pub bias: Tensor,
}

pub type DenseGrads = DenseParams;

pub const DENSE_TENSOR_NAMES: [&str; 2] = ["weights", "bias"];

impl DenseParams {
    pub fn zeros(input: usize) -> Self {
        DenseParams {
            weights: Tensor::zeros(&[NUM_CLASSES, input]),
            bias: Tensor::zeros(&[NUM_CLASSES]),
        }
    }

    pub fn init(input: usize, rng: &mut RngState) -> Result<Self> {
        Ok(DenseParams {
            weights: glorot_init(NUM_CLASSES, input, rng)?,
            bias: Tensor::zeros(&[NUM_CLASSES]),
        })
    }

    pub fn zeros_like(&self) -> Self {
        DenseParams::zeros(self.input_size())
    }

    pub fn input_size(&self) -> usize {
        self.weights.cols()
    }

    pub fn tensors(&self) -> [&Tensor; 2] {
        [&self.weights, &self.bias]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 2] {
        [&mut self.weights, &mut self.bias]
    }

    pub fn from_tensors(t: [Tensor; 2]) -> Result<Self> {
        let [weights, bias] = t;
        if weights.shape().len() != 2 || weights.rows() != NUM_CLASSES {
            return Err(HanError::dim("dense weights", weights.shape(), &[NUM_CLASSES, weights.cols()]));
        }
        if bias.shape() != [NUM_CLASSES] {
            return Err(HanError::dim("dense bias", bias.shape(), &[NUM_CLASSES]));
        }
        Ok(DenseParams { weights, bias })
    }

    pub fn accumulate(&mut self, other: &DenseParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            axpy(1.0, b.data(), a.data_mut());
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.tensors_mut().into_iter().for_each(|t| t.scale(factor));
    }
}

#[derive(Clone, Debug)]
pub struct DenseCache {
    input: Vec<f64>,
    pub probs: Vec<f64>,
}

/// `softmax(weights · v + bias)`.
pub fn dense_softmax(p: &DenseParams, v: &Tensor) -> Result<Tensor> {
    Ok(Tensor::vector(dense_forward(p, v)?.probs))
}

pub fn dense_forward(p: &DenseParams, v: &Tensor) -> Result<DenseCache> {
    if v.shape() != [p.input_size()] {
        return Err(HanError::dim("dense_softmax", p.weights.shape(), v.shape()));
    }
    let mut logits = vec![0.0; NUM_CLASSES];
    matvec_into(&p.weights, v.data(), &mut logits);
    axpy(1.0, p.bias.data(), &mut logits);
    Ok(DenseCache {
        input: v.data().to_vec(),
        probs: softmax_slice(&logits),
    })
}

/// Backward from a gradient on the pre-softmax logits. Returns `dv`.
pub fn dense_backward_logits(
    p: &DenseParams,
    cache: &DenseCache,
    d_logits: &[f64],
    grads: &mut DenseGrads,
) -> Vec<f64> {
    add_outer(&mut grads.weights, d_logits, &cache.input);
    axpy(1.0, d_logits, grads.bias.data_mut());
    let mut dv = vec![0.0; p.input_size()];
    matvec_t_acc(&p.weights, d_logits, &mut dv);
    dv
}

/// Backward from a gradient on the output probabilities.
pub fn dense_backward(
    p: &DenseParams,
    cache: &DenseCache,
    d_probs: &[f64],
    grads: &mut DenseGrads,
) -> Vec<f64> {
    let inner: f64 = cache.probs.iter().zip(d_probs).map(|(a, b)| a * b).sum();
    let d_logits: Vec<f64> = cache
        .probs
        .iter()
        .zip(d_probs)
        .map(|(pi, di)| pi * (di - inner))
        .collect();
    dense_backward_logits(p, cache, &d_logits, grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{check_grad, random_tensor};

    #[test]
    fn zero_params_half_half() {
        let p = DenseParams::zeros(3);
        let out = dense_softmax(&p, &Tensor::vector(vec![1.0, 2.0, 3.0])).unwrap();
        assert_eq!(out.data(), &[0.5, 0.5]);
    }

    #[test]
    fn closed_form_three_to_one() {
        let p = DenseParams {
            weights: Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap(),
            bias: Tensor::zeros(&[2]),
        };
        let out = dense_softmax(&p, &Tensor::vector(vec![3f64.ln(), 0.0])).unwrap();
        assert!((out.data()[0] - 0.75).abs() < 1e-15);
        assert!((out.data()[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn normalized_on_random_inputs() {
        let mut rng = RngState::new(12);
        for _ in 0..100 {
            let p = DenseParams::init(5, &mut rng).unwrap();
            let v = random_tensor(&[5], &mut rng, 10.0);
            let out = dense_softmax(&p, &v).unwrap();
            assert!((out.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_error() {
        let p = DenseParams::zeros(3);
        assert!(matches!(
            dense_softmax(&p, &Tensor::zeros(&[4])),
            Err(HanError::Dimension { .. })
        ));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = RngState::new(44);
        for _ in 0..20 {
            let d = rng.range_inclusive(1, 8);
            let mut p = DenseParams::init(d, &mut rng).unwrap();
            p.bias = random_tensor(&[2], &mut rng, 1.0);
            let v = random_tensor(&[d], &mut rng, 1.0);
            let up = random_tensor(&[2], &mut rng, 1.0);
            let loss = |p: &DenseParams, v: &Tensor| {
                let out = dense_softmax(p, v).unwrap();
                out.data().iter().zip(up.data()).map(|(a, b)| a * b).sum::<f64>()
            };
            let cache = dense_forward(&p, &v).unwrap();
            let mut g = p.zeros_like();
            let dv = dense_backward(&p, &cache, up.data(), &mut g);
            for k in 0..2 {
                let err = check_grad(&p, g.tensors()[k], |q| q.tensors_mut()[k], |q| loss(q, &v));
                assert!(err < 1e-6, "{} rel err {err}", DENSE_TENSOR_NAMES[k]);
            }
            let err = check_grad(&v, &Tensor::vector(dv), |t| t, |t| loss(&p, t));
            assert!(err < 1e-6, "dv rel err {err}");
        }
    }
}

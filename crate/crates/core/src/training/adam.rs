use serde::{Deserialize, Serialize};

use crate::encoders::{GradView, HanGrads, HanModel};
use crate::error::{HanError, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(HanError::Config(format!("invalid Adam settings {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub name: String,
    pub m: Tensor,
    pub v: Tensor,
}

/// Bias-corrected Adam over a fixed list of named tensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub config: AdamConfig,
    pub moments: Vec<Moments>,
}

impl AdamState {
    /// Zero moments shaped like each `(name, shape)`.
    pub fn new<'a>(config: AdamConfig, shapes: impl IntoIterator<Item = (String, &'a [usize])>) -> Self {
        let moments = shapes
            .into_iter()
            .map(|(name, shape)| Moments {
                name,
                m: Tensor::zeros(shape),
                v: Tensor::zeros(shape),
            })
            .collect();
        AdamState { step: 0, config, moments }
    }

    pub fn for_model(config: AdamConfig, model: &HanModel) -> Self {
        let named = model.named_tensors();
        AdamState::new(config, named.iter().map(|(n, t)| (n.clone(), t.shape())))
    }

    /// One update of `params` by `grads`, both in moment order. A `None`
    /// gradient leaves that tensor and its moments untouched. Nothing is
    /// modified when any gradient is non-finite.
    pub fn update(&mut self, params: &mut [&mut Tensor], grads: &[Option<&Tensor>]) -> Result<()> {
        if params.len() != self.moments.len() || grads.len() != self.moments.len() {
            return Err(HanError::dim("adam_update", &[params.len(), grads.len()], &[self.moments.len()]));
        }
        for ((mo, p), g) in self.moments.iter().zip(params.iter()).zip(grads) {
            if p.shape() != mo.m.shape() {
                return Err(HanError::dim("adam_update", p.shape(), mo.m.shape()));
            }
            if let Some(g) = g {
                if g.shape() != mo.m.shape() {
                    return Err(HanError::dim("adam_update", g.shape(), mo.m.shape()));
                }
                if !g.is_finite() {
                    return Err(HanError::NonFinite(format!("gradient of {}", mo.name)));
                }
            }
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - beta1.powf(self.step as f64);
        let c2 = 1.0 - beta2.powf(self.step as f64);
        for ((mo, p), g) in self.moments.iter_mut().zip(params.iter_mut()).zip(grads) {
            let Some(g) = g else { continue };
            let (m, v) = (mo.m.data_mut(), mo.v.data_mut());
            for (((pi, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v.iter_mut()) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *pi -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

/// Applies one Adam step to every model tensor. Embedding rows absent from
/// the sparse gradient count as zero; a frozen embedding is skipped.
pub fn adam_update(state: &mut AdamState, model: &mut HanModel, grads: &HanGrads) -> Result<()> {
    let trainable = model.embedding.trainable;
    let shape = model.embedding.weights.shape().to_vec();
    let views = grads.named_views();
    let dense_embedding = match &views[0].1 {
        GradView::Rows(rows) if trainable => {
            let mut t = Tensor::zeros(&shape);
            for (&id, g) in &rows.rows {
                if id >= shape[0] {
                    return Err(HanError::Index {
                        position: 0,
                        id,
                        size: shape[0],
                    });
                }
                t.row_mut(id).copy_from_slice(g);
            }
            Some(t)
        }
        _ => None,
    };
    let grad_refs: Vec<Option<&Tensor>> = views
        .iter()
        .map(|(_, v)| match v {
            GradView::Dense(t) => Some(*t),
            GradView::Rows(_) => dense_embedding.as_ref(),
        })
        .collect();
    let mut named = model.named_tensors_mut();
    for ((n, _), (gn, _)) in named.iter().zip(&views) {
        if n != gn {
            return Err(HanError::State(format!("gradient {gn} does not line up with parameter {n}")));
        }
    }
    let mut params: Vec<&mut Tensor> = named.iter_mut().map(|(_, t)| &mut **t).collect();
    state.update(&mut params, &grad_refs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::RngState;

    fn scalar_state() -> AdamState {
        AdamState::new(AdamConfig::default(), [("p".to_string(), &[1usize][..])])
    }

    #[test]
    fn zero_gradient_changes_nothing() {
        let mut s = scalar_state();
        let mut p = Tensor::vector(vec![0.7]);
        let g = Tensor::vector(vec![0.0]);
        s.update(&mut [&mut p], &[Some(&g)]).unwrap();
        assert_eq!(p.data(), &[0.7]);
        assert_eq!(s.moments[0].m.data(), &[0.0]);
        assert_eq!(s.moments[0].v.data(), &[0.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // Bias correction cancels: m̂ = 1, v̂ = 1, so Δp = -lr / (1 + ε).
        let mut s = scalar_state();
        let mut p = Tensor::vector(vec![0.0]);
        let g = Tensor::vector(vec![1.0]);
        s.update(&mut [&mut p], &[Some(&g)]).unwrap();
        let expect = -1e-3 / (1.0 + 1e-8);
        assert!((p.data()[0] - expect).abs() < 1e-18);
        assert!((p.data()[0] + 1e-3).abs() < 1e-11);
    }

    #[test]
    fn nan_gradient_names_the_tensor_and_leaves_params() {
        let mut s = scalar_state();
        let mut p = Tensor::vector(vec![0.5]);
        let g = Tensor::vector(vec![f64::NAN]);
        let err = s.update(&mut [&mut p], &[Some(&g)]).unwrap_err();
        assert!(err.to_string().contains('p'));
        assert_eq!(p.data(), &[0.5]);
        assert_eq!(s.step, 0);
    }

    #[test]
    fn steps_toward_quadratic_minimum() {
        let mut rng = RngState::new(3);
        for _ in 0..100 {
            let target = rng.uniform(-5.0, 5.0);
            let start = rng.uniform(-5.0, 5.0);
            let mut s = scalar_state();
            let mut p = Tensor::vector(vec![start]);
            let g = Tensor::vector(vec![2.0 * (start - target)]);
            s.update(&mut [&mut p], &[Some(&g)]).unwrap();
            assert!((p.data()[0] - target).abs() < (start - target).abs());
        }
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let run = || {
            let mut rng = RngState::new(11);
            let mut s = AdamState::new(AdamConfig::default(), [("w".to_string(), &[2usize, 2][..])]);
            let mut p = Tensor::matrix(2, 2, vec![0.1, -0.2, 0.3, 0.4]).unwrap();
            for _ in 0..10 {
                let g = Tensor::matrix(2, 2, (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap();
                s.update(&mut [&mut p], &[Some(&g)]).unwrap();
            }
            (p, s)
        };
        let (a, sa) = run();
        let (b, sb) = run();
        assert_eq!(a.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
                   b.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert_eq!(sa, sb);
    }
}

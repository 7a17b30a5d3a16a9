use crate::error::{HanError, Result};
use crate::tensor::{add_outer, axpy, glorot_init, matvec_into, matvec_t_acc, sigmoid, RngState, Tensor};

/// Parameters of one GRU direction.
///
/// Gate convention:
///
/// ```text
/// z  = σ(w_z x + u_z h + b_z)
/// r  = σ(w_r x + u_r h + b_r)
/// h~ = tanh(w_h x + u_h (r ⊙ h) + b_h)
/// h' = (1 - z) ⊙ h + z ⊙ h~
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams {
    pub w_z: Tensor,
    pub w_r: Tensor,
    pub w_h: Tensor,
    pub u_z: Tensor,
    pub u_r: Tensor,
    pub u_h: Tensor,
    pub b_z: Tensor,
    pub b_r: Tensor,
    pub b_h: Tensor,
}

/// Gradient bundle with the same layout as [`GruParams`].
pub type GruGrads = GruParams;

pub const GRU_TENSOR_NAMES: [&str; 9] = ["w_z", "w_r", "w_h", "u_z", "u_r", "u_h", "b_z", "b_r", "b_h"];

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        GruParams {
            w_z: Tensor::zeros(&[hidden, input]),
            w_r: Tensor::zeros(&[hidden, input]),
            w_h: Tensor::zeros(&[hidden, input]),
            u_z: Tensor::zeros(&[hidden, hidden]),
            u_r: Tensor::zeros(&[hidden, hidden]),
            u_h: Tensor::zeros(&[hidden, hidden]),
            b_z: Tensor::zeros(&[hidden]),
            b_r: Tensor::zeros(&[hidden]),
            b_h: Tensor::zeros(&[hidden]),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(input: usize, hidden: usize, rng: &mut RngState) -> Result<Self> {
        Ok(GruParams {
            w_z: glorot_init(hidden, input, rng)?,
            w_r: glorot_init(hidden, input, rng)?,
            w_h: glorot_init(hidden, input, rng)?,
            u_z: glorot_init(hidden, hidden, rng)?,
            u_r: glorot_init(hidden, hidden, rng)?,
            u_h: glorot_init(hidden, hidden, rng)?,
            b_z: Tensor::zeros(&[hidden]),
            b_r: Tensor::zeros(&[hidden]),
            b_h: Tensor::zeros(&[hidden]),
        })
    }

    pub fn zeros_like(&self) -> Self {
        GruParams::zeros(self.input_size(), self.hidden_size())
    }

    pub fn input_size(&self) -> usize {
        self.w_z.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.b_z.len()
    }

    pub fn tensors(&self) -> [&Tensor; 9] {
        [
            &self.w_z, &self.w_r, &self.w_h, &self.u_z, &self.u_r, &self.u_h, &self.b_z, &self.b_r,
            &self.b_h,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 9] {
        [
            &mut self.w_z,
            &mut self.w_r,
            &mut self.w_h,
            &mut self.u_z,
            &mut self.u_r,
            &mut self.u_h,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_h,
        ]
    }

    /// Rebuilds a bundle from nine tensors in [`GRU_TENSOR_NAMES`] order.
    pub fn from_tensors(t: [Tensor; 9]) -> Result<Self> {
        let [w_z, w_r, w_h, u_z, u_r, u_h, b_z, b_r, b_h] = t;
        let p = GruParams {
            w_z,
            w_r,
            w_h,
            u_z,
            u_r,
            u_h,
            b_z,
            b_r,
            b_h,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden_size();
        let d = self.input_size();
        for w in [&self.w_z, &self.w_r, &self.w_h] {
            if w.shape() != [h, d] {
                return Err(HanError::dim("gru w", w.shape(), &[h, d]));
            }
        }
        for u in [&self.u_z, &self.u_r, &self.u_h] {
            if u.shape() != [h, h] {
                return Err(HanError::dim("gru u", u.shape(), &[h, h]));
            }
        }
        for b in [&self.b_z, &self.b_r, &self.b_h] {
            if b.shape() != [h] {
                return Err(HanError::dim("gru b", b.shape(), &[h]));
            }
        }
        Ok(())
    }

    pub fn accumulate(&mut self, other: &GruParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            axpy(1.0, b.data(), a.data_mut());
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.tensors_mut().into_iter().for_each(|t| t.scale(factor));
    }
}

/// Intermediates of one GRU step, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct GruStepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    candidate: Vec<f64>,
    h: Vec<f64>,
}

impl GruStepCache {
    pub fn output(&self) -> &[f64] {
        &self.h
    }
}

/// One GRU step on shape-checked tensors.
pub fn gru_step(p: &GruParams, x: &Tensor, h_prev: &Tensor) -> Result<Tensor> {
    Ok(Tensor::vector(gru_step_forward(p, x, h_prev)?.h))
}

/// One GRU step that keeps its intermediates for [`gru_step_backward`].
pub fn gru_step_forward(p: &GruParams, x: &Tensor, h_prev: &Tensor) -> Result<GruStepCache> {
    if x.shape() != [p.input_size()] {
        return Err(HanError::dim("gru_step x", x.shape(), &[p.input_size()]));
    }
    if h_prev.shape() != [p.hidden_size()] {
        return Err(HanError::dim("gru_step h_prev", h_prev.shape(), &[p.hidden_size()]));
    }
    Ok(gru_step_cached(p, x.data(), h_prev.data()))
}

pub(crate) fn gru_step_cached(p: &GruParams, x: &[f64], h_prev: &[f64]) -> GruStepCache {
    let hs = p.hidden_size();
    let mut z = vec![0.0; hs];
    let mut r = vec![0.0; hs];
    let mut a_h = vec![0.0; hs];
    let mut tmp = vec![0.0; hs];

    matvec_into(&p.w_z, x, &mut z);
    matvec_into(&p.u_z, h_prev, &mut tmp);
    for i in 0..hs {
        z[i] = sigmoid(z[i] + tmp[i] + p.b_z.data()[i]);
    }
    matvec_into(&p.w_r, x, &mut r);
    matvec_into(&p.u_r, h_prev, &mut tmp);
    for i in 0..hs {
        r[i] = sigmoid(r[i] + tmp[i] + p.b_r.data()[i]);
    }
    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
    matvec_into(&p.w_h, x, &mut a_h);
    matvec_into(&p.u_h, &rh, &mut tmp);
    let candidate: Vec<f64> = (0..hs)
        .map(|i| (a_h[i] + tmp[i] + p.b_h.data()[i]).tanh())
        .collect();
    let h = (0..hs)
        .map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * candidate[i])
        .collect();
    GruStepCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        z,
        r,
        candidate,
        h,
    }
}

/// Backward through one step. Accumulates parameter gradients into `grads`
/// and returns `(dx, dh_prev)`.
pub fn gru_step_backward(
    p: &GruParams,
    cache: &GruStepCache,
    dh: &[f64],
    grads: &mut GruGrads,
) -> (Vec<f64>, Vec<f64>) {
    let hs = p.hidden_size();
    let mut dh_prev: Vec<f64> = (0..hs).map(|i| dh[i] * (1.0 - cache.z[i])).collect();
    let mut dx = vec![0.0; p.input_size()];

    // candidate branch
    let da_h: Vec<f64> = (0..hs)
        .map(|i| dh[i] * cache.z[i] * (1.0 - cache.candidate[i] * cache.candidate[i]))
        .collect();
    let rh: Vec<f64> = cache.r.iter().zip(&cache.h_prev).map(|(a, b)| a * b).collect();
    add_outer(&mut grads.w_h, &da_h, &cache.x);
    add_outer(&mut grads.u_h, &da_h, &rh);
    axpy(1.0, &da_h, grads.b_h.data_mut());
    let mut drh = vec![0.0; hs];
    matvec_t_acc(&p.u_h, &da_h, &mut drh);
    matvec_t_acc(&p.w_h, &da_h, &mut dx);

    // update gate
    let da_z: Vec<f64> = (0..hs)
        .map(|i| {
            let z = cache.z[i];
            dh[i] * (cache.candidate[i] - cache.h_prev[i]) * z * (1.0 - z)
        })
        .collect();
    add_outer(&mut grads.w_z, &da_z, &cache.x);
    add_outer(&mut grads.u_z, &da_z, &cache.h_prev);
    axpy(1.0, &da_z, grads.b_z.data_mut());
    matvec_t_acc(&p.u_z, &da_z, &mut dh_prev);
    matvec_t_acc(&p.w_z, &da_z, &mut dx);

    // reset gate
    let da_r: Vec<f64> = (0..hs)
        .map(|i| {
            let r = cache.r[i];
            drh[i] * cache.h_prev[i] * r * (1.0 - r)
        })
        .collect();
    for i in 0..hs {
        dh_prev[i] += drh[i] * cache.r[i];
    }
    add_outer(&mut grads.w_r, &da_r, &cache.x);
    add_outer(&mut grads.u_r, &da_r, &cache.h_prev);
    axpy(1.0, &da_r, grads.b_r.data_mut());
    matvec_t_acc(&p.u_r, &da_r, &mut dh_prev);
    matvec_t_acc(&p.w_r, &da_r, &mut dx);

    (dx, dh_prev)
}

/// Per-position step caches for both directions of a bidirectional pass.
#[derive(Clone, Debug)]
pub struct BiGruCache {
    fwd: Vec<GruStepCache>,
    // indexed by input position, not by processing order
    bwd: Vec<GruStepCache>,
}

/// Runs the forward GRU over `xs` in order and the backward GRU in reverse,
/// both from zero state. Row `t` of the result is `[h_fwd(t), h_bwd(t)]`.
pub fn bigru_forward(fwd: &GruParams, bwd: &GruParams, xs: &Tensor) -> Result<(Tensor, BiGruCache)> {
    if xs.shape().len() != 2 || xs.rows() == 0 {
        return Err(HanError::Domain(format!(
            "bigru_forward needs a nonempty T×d sequence, got {:?}",
            xs.shape()
        )));
    }
    if xs.cols() != fwd.input_size() || xs.cols() != bwd.input_size() {
        return Err(HanError::dim("bigru_forward", xs.shape(), &[fwd.input_size()]));
    }
    let t_len = xs.rows();
    let hf = fwd.hidden_size();
    let hb = bwd.hidden_size();

    let mut fwd_caches = Vec::with_capacity(t_len);
    let mut h = vec![0.0; hf];
    for t in 0..t_len {
        let c = gru_step_cached(fwd, xs.row(t), &h);
        h.copy_from_slice(&c.h);
        fwd_caches.push(c);
    }
    let mut bwd_caches: Vec<Option<GruStepCache>> = vec![None; t_len];
    let mut h = vec![0.0; hb];
    for t in (0..t_len).rev() {
        let c = gru_step_cached(bwd, xs.row(t), &h);
        h.copy_from_slice(&c.h);
        bwd_caches[t] = Some(c);
    }
    let bwd_caches: Vec<GruStepCache> = bwd_caches.into_iter().flatten().collect();

    let mut out = Vec::with_capacity(t_len * (hf + hb));
    for t in 0..t_len {
        out.extend_from_slice(&fwd_caches[t].h);
        out.extend_from_slice(&bwd_caches[t].h);
    }
    let out = Tensor::matrix(t_len, hf + hb, out)?;
    Ok((
        out,
        BiGruCache {
            fwd: fwd_caches,
            bwd: bwd_caches,
        },
    ))
}

/// Backpropagation through time for both directions. Returns `dxs` (T×d).
pub fn bigru_backward(
    fwd: &GruParams,
    bwd: &GruParams,
    cache: &BiGruCache,
    d_out: &Tensor,
    g_fwd: &mut GruGrads,
    g_bwd: &mut GruGrads,
) -> Result<Tensor> {
    let t_len = cache.fwd.len();
    let hf = fwd.hidden_size();
    let hb = bwd.hidden_size();
    if d_out.shape() != [t_len, hf + hb] {
        return Err(HanError::dim("bigru_backward", d_out.shape(), &[t_len, hf + hb]));
    }
    let d_in = fwd.input_size();
    let mut dxs = Tensor::zeros(&[t_len, d_in]);

    let mut carry = vec![0.0; hf];
    for t in (0..t_len).rev() {
        let mut dh = d_out.row(t)[..hf].to_vec();
        axpy(1.0, &carry, &mut dh);
        let (dx, dh_prev) = gru_step_backward(fwd, &cache.fwd[t], &dh, g_fwd);
        axpy(1.0, &dx, dxs.row_mut(t));
        carry = dh_prev;
    }
    let mut carry = vec![0.0; hb];
    for t in 0..t_len {
        let mut dh = d_out.row(t)[hf..].to_vec();
        axpy(1.0, &carry, &mut dh);
        let (dx, dh_prev) = gru_step_backward(bwd, &cache.bwd[t], &dh, g_bwd);
        axpy(1.0, &dx, dxs.row_mut(t));
        carry = dh_prev;
    }
    Ok(dxs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{check_grad, random_tensor};

    fn random_gru(d: usize, h: usize, rng: &mut RngState) -> GruParams {
        let mut p = GruParams::init(d, h, rng).unwrap();
        // nonzero biases exercise every term
        for b in [&mut p.b_z, &mut p.b_r, &mut p.b_h] {
            *b = random_tensor(&[h], rng, 0.5);
        }
        p
    }

    #[test]
    fn zero_params_zero_state_gives_zero() {
        let p = GruParams::zeros(3, 2);
        let h = gru_step(&p, &Tensor::vector(vec![1.0, -2.0, 0.5]), &Tensor::zeros(&[2])).unwrap();
        assert_eq!(h.data(), &[0.0, 0.0]);
    }

    #[test]
    fn zero_params_halves_previous_state() {
        let p = GruParams::zeros(3, 2);
        let v = Tensor::vector(vec![0.8, -0.4]);
        let h = gru_step(&p, &Tensor::vector(vec![1.0, 1.0, 1.0]), &v).unwrap();
        assert_eq!(h.data(), &[0.4, -0.2]);
    }

    #[test]
    fn step_output_bounded() {
        let mut rng = RngState::new(4);
        for _ in 0..50 {
            let p = random_gru(4, 3, &mut rng);
            let x = random_tensor(&[4], &mut rng, 10.0);
            let hp = random_tensor(&[3], &mut rng, 3.0);
            let bound = hp.data().iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let h = gru_step(&p, &x, &hp).unwrap();
            assert!(h.data().iter().all(|v| v.abs() <= bound + 1e-12));
        }
    }

    #[test]
    fn step_dimension_error() {
        let p = GruParams::zeros(3, 2);
        assert!(matches!(
            gru_step(&p, &Tensor::zeros(&[2]), &Tensor::zeros(&[2])),
            Err(HanError::Dimension { .. })
        ));
    }

    #[test]
    fn single_step_bigru_matches_gru_step() {
        let mut rng = RngState::new(8);
        let f = random_gru(3, 2, &mut rng);
        let b = random_gru(3, 2, &mut rng);
        let x = random_tensor(&[3], &mut rng, 1.0);
        let xs = Tensor::matrix(1, 3, x.data().to_vec()).unwrap();
        let (out, _) = bigru_forward(&f, &b, &xs).unwrap();
        let hf = gru_step(&f, &x, &Tensor::zeros(&[2])).unwrap();
        let hb = gru_step(&b, &x, &Tensor::zeros(&[2])).unwrap();
        assert_eq!(&out.row(0)[..2], hf.data());
        assert_eq!(&out.row(0)[2..], hb.data());
    }

    #[test]
    fn reversal_symmetry() {
        let mut rng = RngState::new(21);
        let f = random_gru(3, 2, &mut rng);
        let b = random_gru(3, 2, &mut rng);
        let xs = random_tensor(&[5, 3], &mut rng, 1.0);
        let rows: Vec<Vec<f64>> = (0..5).rev().map(|t| xs.row(t).to_vec()).collect();
        let rev = Tensor::from_rows(&rows).unwrap();

        let (out, _) = bigru_forward(&f, &b, &xs).unwrap();
        let (out_rev, _) = bigru_forward(&b, &f, &rev).unwrap();
        for t in 0..5 {
            let r = 4 - t;
            assert_eq!(&out.row(t)[..2], &out_rev.row(r)[2..]);
            assert_eq!(&out.row(t)[2..], &out_rev.row(r)[..2]);
        }
    }

    #[test]
    fn zero_params_give_zero_annotations() {
        let p = GruParams::zeros(3, 4);
        let xs = random_tensor(&[6, 3], &mut RngState::new(1), 2.0);
        let (out, _) = bigru_forward(&p, &p, &xs).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_sequence_rejected() {
        let p = GruParams::zeros(3, 2);
        assert!(matches!(
            bigru_forward(&p, &p, &Tensor::zeros(&[0, 3])),
            Err(HanError::Domain(_))
        ));
    }

    #[test]
    fn bigru_deterministic() {
        let mut rng = RngState::new(2);
        let f = random_gru(3, 2, &mut rng);
        let b = random_gru(3, 2, &mut rng);
        let xs = random_tensor(&[4, 3], &mut rng, 1.0);
        let (a, _) = bigru_forward(&f, &b, &xs).unwrap();
        let (c, _) = bigru_forward(&f, &b, &xs).unwrap();
        assert_eq!(
            a.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            c.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn step_gradients_match_finite_differences() {
        let mut rng = RngState::new(77);
        for _ in 0..20 {
            let d = rng.range_inclusive(1, 6);
            let h = rng.range_inclusive(1, 6);
            let p = random_gru(d, h, &mut rng);
            let x = random_tensor(&[d], &mut rng, 1.0);
            let hp = random_tensor(&[h], &mut rng, 0.8);
            let up = random_tensor(&[h], &mut rng, 1.0);
            let loss = |p: &GruParams, x: &Tensor, hp: &Tensor| {
                let out = gru_step(p, x, hp).unwrap();
                out.data().iter().zip(up.data()).map(|(a, b)| a * b).sum::<f64>()
            };
            let cache = gru_step_cached(&p, x.data(), hp.data());
            let mut g = p.zeros_like();
            let (dx, dhp) = gru_step_backward(&p, &cache, up.data(), &mut g);

            for k in 0..9 {
                let err = check_grad(
                    &p,
                    g.tensors()[k],
                    |q| q.tensors_mut()[k],
                    |q| loss(q, &x, &hp),
                );
                assert!(err < 1e-6, "param {} rel err {err}", GRU_TENSOR_NAMES[k]);
            }
            let err = check_grad(&x, &Tensor::vector(dx), |t| t, |t| loss(&p, t, &hp));
            assert!(err < 1e-6, "dx rel err {err}");
            let err = check_grad(&hp, &Tensor::vector(dhp), |t| t, |t| loss(&p, &x, t));
            assert!(err < 1e-6, "dh_prev rel err {err}");
        }
    }

    #[test]
    fn bigru_gradients_match_finite_differences() {
        let mut rng = RngState::new(5);
        for _ in 0..20 {
            let d = rng.range_inclusive(1, 5);
            let h = rng.range_inclusive(1, 5);
            let t_len = rng.range_inclusive(1, 6);
            let f = random_gru(d, h, &mut rng);
            let b = random_gru(d, h, &mut rng);
            let xs = random_tensor(&[t_len, d], &mut rng, 1.0);
            let up = random_tensor(&[t_len, 2 * h], &mut rng, 1.0);
            let loss = |f: &GruParams, b: &GruParams, xs: &Tensor| {
                let (out, _) = bigru_forward(f, b, xs).unwrap();
                out.data().iter().zip(up.data()).map(|(a, b)| a * b).sum::<f64>()
            };
            let (_, cache) = bigru_forward(&f, &b, &xs).unwrap();
            let mut gf = f.zeros_like();
            let mut gb = b.zeros_like();
            let dxs = bigru_backward(&f, &b, &cache, &up, &mut gf, &mut gb).unwrap();
            for k in 0..9 {
                let err = check_grad(&f, gf.tensors()[k], |q| q.tensors_mut()[k], |q| loss(q, &b, &xs));
                assert!(err < 1e-6, "fwd {} rel err {err}", GRU_TENSOR_NAMES[k]);
                let err = check_grad(&b, gb.tensors()[k], |q| q.tensors_mut()[k], |q| loss(&f, q, &xs));
                assert!(err < 1e-6, "bwd {} rel err {err}", GRU_TENSOR_NAMES[k]);
            }
            let err = check_grad(&xs, &dxs, |t| t, |t| loss(&f, &b, t));
            assert!(err < 1e-6, "dxs rel err {err}");
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = RngState::new(3);
        let p = random_gru(3, 2, &mut rng);
        let cache = gru_step_cached(&p, &[0.1, 0.2, 0.3], &[0.5, -0.5]);
        let mut g = p.zeros_like();
        let (dx, dh) = gru_step_backward(&p, &cache, &[0.0, 0.0], &mut g);
        assert!(g.tensors().iter().all(|t| t.data().iter().all(|&v| v == 0.0)));
        assert!(dx.iter().chain(&dh).all(|&v| v == 0.0));
    }
}

//! Central finite-difference oracle shared by the unit tests.

use crate::tensor::{RngState, Tensor};

pub const FD_STEP: f64 = 1e-5;

/// `|a - n| / max(|a|, |n|, 1e-3)`; the floor keeps near-zero gradients from
/// turning round-off into large relative errors.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// Compares `analytic` against central differences of `loss` with respect to
/// every entry of the tensor selected by `select`. Returns the max relative
/// error.
pub fn check_grad<P: Clone>(
    base: &P,
    analytic: &Tensor,
    select: impl Fn(&mut P) -> &mut Tensor,
    loss: impl Fn(&P) -> f64,
) -> f64 {
    let mut probe = base.clone();
    let n = select(&mut probe).len();
    assert_eq!(n, analytic.len(), "gradient shape mismatch");
    let mut worst = 0.0f64;
    for i in 0..n {
        let orig = select(&mut probe).data()[i];
        select(&mut probe).data_mut()[i] = orig + FD_STEP;
        let up = loss(&probe);
        select(&mut probe).data_mut()[i] = orig - FD_STEP;
        let down = loss(&probe);
        select(&mut probe).data_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(analytic.data()[i], numeric));
    }
    worst
}

pub fn random_tensor(shape: &[usize], rng: &mut RngState, scale: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.uniform(-scale, scale)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

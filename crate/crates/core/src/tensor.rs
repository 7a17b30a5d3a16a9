//! Dense vectors and matrices over `f64`, activations, and seeded randomness.
//!
//! Everything above this module stores its parameters and activations as
//! [`Tensor`]s. Rank is limited to 1 (vectors) and 2 (row-major matrices).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HanError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 2 {
            return Err(HanError::Domain(format!(
                "tensor rank must be 1 or 2, got shape {shape:?}"
            )));
        }
        let expected = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| HanError::Domain(format!("shape {shape:?} overflows")))?;
        if expected != data.len() {
            return Err(HanError::dim("tensor", &shape, &[data.len()]));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![rows, cols], data)
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(HanError::dim("from_rows", &[cols], &[row.len()]));
            }
            data.extend_from_slice(row);
        }
        Tensor::matrix(rows.len(), cols, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Number of columns; 1 for vectors.
    pub fn cols(&self) -> usize {
        self.shape.get(1).copied().unwrap_or(1)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(HanError::dim("add", &self.shape, &other.shape));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(HanError::dim("add_assign", &self.shape, &other.shape));
        }
        axpy(1.0, &other.data, &mut self.data);
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|x| *x *= factor);
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `m · v` for an `r×c` matrix and a length-`c` vector.
pub fn matvec(m: &Tensor, v: &Tensor) -> Result<Tensor> {
    if m.shape.len() != 2 || v.shape.len() != 1 || m.shape[1] != v.shape[0] {
        return Err(HanError::dim("matvec", &m.shape, &v.shape));
    }
    let mut out = vec![0.0; m.shape[0]];
    matvec_into(m, &v.data, &mut out);
    Ok(Tensor::vector(out))
}

/// `mᵀ · v` for an `r×c` matrix and a length-`r` vector.
pub fn matvec_t(m: &Tensor, v: &Tensor) -> Result<Tensor> {
    if m.shape.len() != 2 || v.shape.len() != 1 || m.shape[0] != v.shape[0] {
        return Err(HanError::dim("matvec_t", &m.shape, &v.shape));
    }
    let mut out = vec![0.0; m.shape[1]];
    matvec_t_acc(m, &v.data, &mut out);
    Ok(Tensor::vector(out))
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(v: &Tensor) -> Result<Tensor> {
    if v.is_empty() {
        return Err(HanError::Domain("softmax of empty vector".into()));
    }
    Ok(Tensor::vector(softmax_slice(&v.data)))
}

pub fn tanh_elem(v: &Tensor) -> Tensor {
    v.map(f64::tanh)
}

pub fn sigmoid_elem(v: &Tensor) -> Tensor {
    v.map(sigmoid)
}

/// Uniform Glorot initialization in `[-a, a]`, `a = sqrt(6 / (rows + cols))`.
pub fn glorot_init(rows: usize, cols: usize, rng: &mut RngState) -> Result<Tensor> {
    if rows == 0 || cols == 0 {
        return Err(HanError::Domain(format!(
            "glorot_init needs nonzero dimensions, got {rows}x{cols}"
        )));
    }
    let a = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.uniform(-a, a)).collect();
    Tensor::matrix(rows, cols, data)
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, otherwise
/// `1 / (1 - rate)`.
pub fn dropout_mask(n: usize, rate: f64, rng: &mut RngState) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(HanError::Domain(format!(
            "dropout rate must lie in [0, 1), got {rate}"
        )));
    }
    if rate == 0.0 {
        return Ok(Tensor::vector(vec![1.0; n]));
    }
    let keep = 1.0 / (1.0 - rate);
    let data = (0..n)
        .map(|_| if rng.unit() < rate { 0.0 } else { keep })
        .collect();
    Ok(Tensor::vector(data))
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_slice(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= sum);
    out
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `out = m · v` (overwrites `out`).
pub(crate) fn matvec_into(m: &Tensor, v: &[f64], out: &mut [f64]) {
    let c = m.cols();
    for (o, row) in out.iter_mut().zip(m.data.chunks_exact(c)) {
        *o = dot(row, v);
    }
}

/// `out += mᵀ · v`.
pub(crate) fn matvec_t_acc(m: &Tensor, v: &[f64], out: &mut [f64]) {
    let c = m.cols();
    for (&vi, row) in v.iter().zip(m.data.chunks_exact(c)) {
        if vi != 0.0 {
            axpy(vi, row, out);
        }
    }
}

/// `m += a · bᵀ`.
pub(crate) fn add_outer(m: &mut Tensor, a: &[f64], b: &[f64]) {
    let c = m.cols();
    for (&ai, row) in a.iter().zip(m.data.chunks_exact_mut(c)) {
        if ai != 0.0 {
            axpy(ai, b, row);
        }
    }
}

/// Seeded ChaCha8 generator; identical seeds give identical streams on every
/// platform.
#[derive(Clone, Debug)]
pub struct RngState {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

/// Serializable position of an [`RngState`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSnapshot {
    pub seed: u64,
    pub stream: u64,
    /// Word position in the keystream, as a decimal string (u128).
    pub word_pos: String,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState::derive(seed, 0)
    }

    /// Independent stream for the same seed, used to give each worker or
    /// training step its own generator.
    pub fn derive(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngState { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform draw in `[lo, hi]`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.rng.gen::<u64>() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn range_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        self.rng.gen_range(lo..=hi)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        // Fisher-Yates, written out so the permutation depends only on our
        // own draw sequence.
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn snapshot(&self) -> RngSnapshot {
        RngSnapshot {
            seed: self.seed,
            stream: self.stream,
            word_pos: self.rng.get_word_pos().to_string(),
        }
    }

    pub fn restore(snapshot: &RngSnapshot) -> Result<Self> {
        let pos: u128 = snapshot
            .word_pos
            .parse()
            .map_err(|_| HanError::Format(format!("bad rng word position {:?}", snapshot.word_pos)))?;
        let mut state = RngState::derive(snapshot.seed, snapshot.stream);
        state.rng.set_word_pos(pos);
        Ok(state)
    }
}

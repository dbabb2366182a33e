use rand::Rng;

use super::matrix::{norm, Matrix};
use crate::error::{Error, Result};
use crate::par;

/// A trainable tensor and its accumulated gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter {
    pub value: Matrix,
    pub grad: Matrix,
}

impl Parameter {
    pub fn new(value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Self { value, grad }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(Matrix::zeros(rows, cols))
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Matrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-limit..=limit))
        .collect();
    Matrix::from_vec(fan_in, fan_out, data).expect("glorot shape")
}

/// Fully connected layer, `y = x·W + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl Affine {
    pub fn new<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        Self {
            weight: Parameter::new(glorot_uniform(fan_in, fan_out, rng)),
            bias: Parameter::zeros(1, fan_out),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        affine_forward(input, &self.weight, &self.bias)
    }

    pub fn backward(&mut self, upstream: &Matrix, cached_input: &Matrix) -> Result<Matrix> {
        affine_backward(upstream, cached_input, &mut self.weight, &mut self.bias)
    }

    pub fn parameters_mut(&mut self) -> [&mut Parameter; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn parameters(&self) -> [&Parameter; 2] {
        [&self.weight, &self.bias]
    }
}

pub fn affine_forward(input: &Matrix, weight: &Parameter, bias: &Parameter) -> Result<Matrix> {
    let w = &weight.value;
    if input.cols() != w.rows() {
        return Err(Error::dim("affine_forward", input.shape(), w.shape()));
    }
    if bias.value.shape() != (1, w.cols()) {
        return Err(Error::dim("affine_forward bias", bias.value.shape(), (1, w.cols())));
    }
    let mut out = input.matmul(w)?;
    let b = bias.value.row(0);
    par::for_each_row(out.as_mut_slice(), w.cols(), |_, row| {
        row.iter_mut().zip(b).for_each(|(o, &bv)| *o += bv);
    });
    Ok(out)
}

/// Accumulates `W.grad += xᵀ·g`, `b.grad += Σ_rows g` and returns `g·Wᵀ`.
pub fn affine_backward(
    upstream: &Matrix,
    cached_input: &Matrix,
    weight: &mut Parameter,
    bias: &mut Parameter,
) -> Result<Matrix> {
    let w = &weight.value;
    let expected = (cached_input.rows(), w.cols());
    if upstream.shape() != expected {
        return Err(Error::dim("affine_backward", upstream.shape(), expected));
    }
    if cached_input.cols() != w.rows() {
        return Err(Error::dim("affine_backward input", cached_input.shape(), w.shape()));
    }
    let dw = cached_input.t_matmul(upstream)?;
    weight.grad.add_assign(&dw)?;
    let db = upstream.column_sums();
    bias.grad
        .as_mut_slice()
        .iter_mut()
        .zip(db)
        .for_each(|(g, d)| *g += d);
    upstream.matmul_t(&weight.value)
}

pub fn relu_forward(x: &Matrix) -> Matrix {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

pub fn relu_backward(upstream: &Matrix, cached_x: &Matrix) -> Result<Matrix> {
    if upstream.shape() != cached_x.shape() {
        return Err(Error::dim("relu_backward", upstream.shape(), cached_x.shape()));
    }
    let mut out = upstream.clone();
    out.as_mut_slice()
        .iter_mut()
        .zip(cached_x.as_slice())
        .for_each(|(g, &x)| {
            if x <= 0.0 {
                *g = 0.0;
            }
        });
    Ok(out)
}

/// Row-wise softmax with per-row max subtraction.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    par::for_each_row(out.as_mut_slice(), logits.cols(), |_, row| {
        softmax_in_place(row);
    });
    out
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// Backward of [`softmax_rows`] given its output `probs`:
/// `dz_j = p_j (g_j − Σ_k g_k p_k)`.
pub fn softmax_backward(upstream: &Matrix, probs: &Matrix) -> Result<Matrix> {
    if upstream.shape() != probs.shape() {
        return Err(Error::dim("softmax_backward", upstream.shape(), probs.shape()));
    }
    let mut out = Matrix::zeros(probs.rows(), probs.cols());
    par::for_each_row(out.as_mut_slice(), probs.cols(), |r, row| {
        let g = upstream.row(r);
        let p = probs.row(r);
        let inner: f64 = g.iter().zip(p).map(|(a, b)| a * b).sum();
        for ((o, &gj), &pj) in row.iter_mut().zip(g).zip(p) {
            *o = pj * (gj - inner);
        }
    });
    Ok(out)
}

/// Row norms below this are treated as degenerate by [`l2_normalize_rows`].
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Normalized rows plus the pre-normalization norms. Rows with norm below
/// [`DEGENERATE_NORM`] are returned as zeros; the count of such rows is the
/// third element.
pub fn l2_normalize_rows(x: &Matrix) -> (Matrix, Vec<f64>, usize) {
    let norms: Vec<f64> = x.row_iter().map(norm).collect();
    let mut out = x.clone();
    par::for_each_row(out.as_mut_slice(), x.cols(), |r, row| {
        let n = norms[r];
        if n < DEGENERATE_NORM {
            row.fill(0.0);
        } else {
            row.iter_mut().for_each(|v| *v /= n);
        }
    });
    let degenerate = norms.iter().filter(|&&n| n < DEGENERATE_NORM).count();
    (out, norms, degenerate)
}

/// Backward of row normalization: `dx = (g − z (z·g)) / ‖x‖`.
pub fn l2_normalize_backward(upstream: &Matrix, normalized: &Matrix, norms: &[f64]) -> Result<Matrix> {
    if upstream.shape() != normalized.shape() {
        return Err(Error::dim("l2_normalize_backward", upstream.shape(), normalized.shape()));
    }
    let mut out = Matrix::zeros(upstream.rows(), upstream.cols());
    par::for_each_row(out.as_mut_slice(), upstream.cols(), |r, row| {
        let n = norms[r];
        if n < DEGENERATE_NORM {
            return;
        }
        let g = upstream.row(r);
        let z = normalized.row(r);
        let zg: f64 = g.iter().zip(z).map(|(a, b)| a * b).sum();
        for ((o, &gj), &zj) in row.iter_mut().zip(g).zip(z) {
            *o = (gj - zj * zg) / n;
        }
    });
    Ok(out)
}

//! Pieces shared by the BINN and the logistic baseline: parameter traversal,
//! mini-batches, and the numerically stable sigmoid helpers.

use crate::linalg::Matrix;

/// Borrowed view of one named parameter tensor.
#[derive(Debug, Clone)]
pub struct TensorView<'a> {
    pub name: String,
    pub shape: [usize; 2],
    pub data: &'a [f64],
}

/// A model whose learnable state is a fixed, ordered list of tensors.
///
/// `tensors` and `tensors_mut` must yield the same tensors in the same order;
/// optimizers and checkpoints rely on that.
pub trait Parameters {
    fn tensors(&self) -> Vec<TensorView<'_>>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }
}

/// A mini-batch: one feature row per video and its per-layer positive sets.
#[derive(Debug, Clone)]
pub struct Batch<'a> {
    pub x: Matrix,
    pub labels: Vec<&'a [Vec<usize>]>,
}

impl Batch<'_> {
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Binary cross-entropy of a logit against a 0/1 target, in log-sigmoid form.
pub fn logit_cross_entropy(z: f64, positive: bool) -> f64 {
    if positive {
        softplus(-z)
    } else {
        softplus(z)
    }
}

/// Multi-hot encoding of `positives` over `n` labels.
pub fn multi_hot(positives: &[usize], n: usize) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for &i in positives {
        y[i] = 1.0;
    }
    y
}

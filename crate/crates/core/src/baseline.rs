//! Independent per-entity logistic regression.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{gemm, Matrix};
use crate::model::{logit_cross_entropy, multi_hot, sigmoid, Batch, Parameters, TensorView};

/// One weight row per entity; the last column is the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRegParams {
    /// `N × (D + 1)`.
    pub weights: Matrix,
    /// L2 strength on the non-bias weights.
    pub lambda: f64,
}

impl LogRegParams {
    pub fn zeros(classes: usize, d: usize) -> Self {
        Self {
            weights: Matrix::zeros(classes, d + 1),
            lambda: 0.0,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols() - 1
    }

    fn logit(&self, class: usize, x: &[f64]) -> f64 {
        let w = self.weights.row(class);
        let d = x.len();
        crate::linalg::dot(&w[..d], x) + w[d]
    }

    /// `sigmoid(w_e · [x; 1])` for every entity `e`.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), x.len(), "logistic regression input")?;
        Ok((0..self.classes())
            .map(|e| sigmoid(self.logit(e, x)))
            .collect())
    }

    pub fn predict_batch(&self, xs: &Matrix) -> Result<Matrix> {
        let mut z = self.logits_batch(xs)?;
        z.as_mut_slice().iter_mut().for_each(|v| *v = sigmoid(*v));
        Ok(z)
    }

    fn logits_batch(&self, xs: &Matrix) -> Result<Matrix> {
        let d = self.input_dim();
        check_dim(d, xs.cols(), "logistic regression batch input")?;
        let b = xs.rows();
        let n = self.classes();
        let mut z = Matrix::zeros(b, n);
        for r in 0..b {
            for e in 0..n {
                z[(r, e)] = self.weights[(e, d)];
            }
        }
        // z += X · W[:, :D]ᵀ, using a view of W without the bias column.
        let w_no_bias = Matrix::from_fn(n, d, |e, c| self.weights[(e, c)]);
        gemm(
            1.0,
            xs.as_slice(),
            b,
            d,
            false,
            w_no_bias.as_slice(),
            n,
            d,
            true,
            1.0,
            z.as_mut_slice(),
        );
        Ok(z)
    }

    /// `lambda · Σ_e ‖w_e‖²` with the bias coordinate excluded.
    pub fn penalty(&self) -> f64 {
        let d = self.input_dim();
        self.lambda
            * (0..self.classes())
                .map(|e| self.weights.row(e)[..d].iter().map(|w| w * w).sum::<f64>())
                .sum::<f64>()
    }

    /// Loss and gradient for a single video.
    pub fn loss_grad(&self, x: &[f64], positives: &[usize]) -> Result<(f64, Matrix)> {
        check_dim(self.input_dim(), x.len(), "logistic regression input")?;
        let n = self.classes();
        if let Some(&bad) = positives.iter().find(|&&e| e >= n) {
            return Err(Error::LabelOutOfRange {
                layer: 0,
                index: bad,
                len: n,
            });
        }
        let y = multi_hot(positives, n);
        let d = self.input_dim();
        let mut grad = Matrix::zeros(n, d + 1);
        let mut loss = self.penalty();
        for e in 0..n {
            let z = self.logit(e, x);
            loss += logit_cross_entropy(z, y[e] > 0.5);
            let g = sigmoid(z) - y[e];
            let row = grad.row_mut(e);
            for (gc, (&xc, &wc)) in row[..d]
                .iter_mut()
                .zip(x.iter().zip(&self.weights.row(e)[..d]))
            {
                *gc = g * xc + 2.0 * self.lambda * wc;
            }
            row[d] = g;
        }
        Ok((loss, grad))
    }

    /// Summed data loss over the batch plus one copy of the penalty;
    /// gradients accumulate into `grads`.
    pub fn batch_loss_grad(&self, batch: &Batch<'_>, grads: &mut LogRegParams) -> Result<f64> {
        let b = batch.len();
        let n = self.classes();
        let d = self.input_dim();
        let z = self.logits_batch(&batch.x)?;
        let mut g = Matrix::zeros(b, n);
        let mut loss = self.penalty();
        for r in 0..b {
            let positives = batch.labels[r].last().ok_or(Error::Empty("label layers"))?;
            let y = multi_hot(positives, n);
            for e in 0..n {
                let zi = z[(r, e)];
                loss += logit_cross_entropy(zi, y[e] > 0.5);
                g[(r, e)] = sigmoid(zi) - y[e];
            }
        }
        // dW[:, :D] = gᵀ X, dW[:, D] = column sums of g.
        let mut gw = Matrix::zeros(n, d);
        gemm(
            1.0,
            g.as_slice(),
            b,
            n,
            true,
            batch.x.as_slice(),
            b,
            d,
            false,
            0.0,
            gw.as_mut_slice(),
        );
        for e in 0..n {
            let bias: f64 = (0..b).map(|r| g[(r, e)]).sum();
            let w = self.weights.row(e);
            let out = grads.weights.row_mut(e);
            for c in 0..d {
                out[c] += gw[(e, c)] + 2.0 * self.lambda * w[c];
            }
            out[d] += bias;
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite("logistic regression batch loss".into()));
        }
        Ok(loss)
    }
}

impl Parameters for LogRegParams {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        vec![TensorView {
            name: "logreg.weights".into(),
            shape: [self.weights.rows(), self.weights.cols()],
            data: self.weights.as_slice(),
        }]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.weights.as_mut_slice()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn random(n: usize, d: usize, seed: u64) -> LogRegParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LogRegParams {
            weights: Matrix::from_fn(n, d + 1, |_, _| rng.gen_range(-1.0..1.0)),
            lambda: 0.0,
        }
    }

    #[test]
    fn zero_weights_predict_half() {
        let p = LogRegParams::zeros(4, 3);
        assert_eq!(p.predict(&[1.0, 2.0, 3.0]).unwrap(), vec![0.5; 4]);
        let (l, _) = p.loss_grad(&[1.0, 2.0, 3.0], &[2]).unwrap();
        assert!((l - 4.0 * LN_2).abs() < 1e-12);
        assert!(p.predict(&[1.0]).is_err());
    }

    #[test]
    fn unit_first_weight_on_zero_input() {
        let mut p = LogRegParams::zeros(1, 3);
        p.weights[(0, 0)] = 1.0;
        assert_eq!(p.predict(&[0.0; 3]).unwrap(), vec![0.5]);
    }

    #[test]
    fn predict_matches_scalar_loop() {
        let p = random(5, 7, 3);
        let x: Vec<f64> = (0..7).map(|i| 0.1 * i as f64 - 0.3).collect();
        let got = p.predict(&x).unwrap();
        for e in 0..5 {
            let mut z = p.weights[(e, 7)];
            for c in 0..7 {
                z += p.weights[(e, c)] * x[c];
            }
            assert!((got[e] - 1.0 / (1.0 + (-z).exp())).abs() < 1e-9);
        }
    }

    #[test]
    fn penalty_skips_bias() {
        let mut p = LogRegParams::zeros(2, 2).with_lambda(0.5);
        p.weights[(0, 2)] = 100.0;
        p.weights[(1, 0)] = 2.0;
        assert_eq!(p.penalty(), 0.5 * 4.0);
        let (_, g) = p.loss_grad(&[0.0, 0.0], &[]).unwrap();
        assert_eq!(g[(1, 0)], 2.0 * 0.5 * 2.0);
    }

    #[test]
    fn batch_matches_per_sample() {
        let p = random(6, 4, 9).with_lambda(0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<Vec<Vec<usize>>> = (0..5).map(|i| vec![vec![i % 6]]).collect();
        let batch = Batch {
            x: Matrix::from_vec(5, 4, xs.concat()).unwrap(),
            labels: labels.iter().map(Vec::as_slice).collect(),
        };
        let mut got = LogRegParams::zeros(6, 4);
        let loss = p.batch_loss_grad(&batch, &mut got).unwrap();

        // Per-sample calls each include the penalty; the batch counts it once.
        let mut expect = Matrix::zeros(6, 5);
        let mut expect_loss = 0.0;
        let mut p0 = p.clone();
        p0.lambda = 0.0;
        for (x, y) in xs.iter().zip(&labels) {
            let (l, g) = p0.loss_grad(x, &y[0]).unwrap();
            expect_loss += l;
            for (a, b) in expect.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *a += b;
            }
        }
        expect_loss += p.penalty();
        for e in 0..6 {
            for c in 0..4 {
                expect[(e, c)] += 2.0 * p.lambda * p.weights[(e, c)];
            }
        }
        assert!((loss - expect_loss).abs() < 1e-10);
        for (a, b) in got.weights.as_slice().iter().zip(expect.as_slice()) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}

//! Bidirectional Inference Neural Network.
//!
//! The input feature is projected separately into every concept layer. A
//! top-down chain (coarse → fine) and a bottom-up chain (fine → coarse) of
//! affine messages run over the layers, and the two directions are blended
//! per label by learned elementwise weights:
//!
//! ```text
//! x_t   = W_t x + b_t
//! f_t   = Vf_t f_{t-1} + Hf_t x_t + bf_t        (Vf term absent at t = 0)
//! g_t   = Vb_t g_{t+1} + Hb_t x_t + bb_t        (Vb term absent at t = m-1)
//! a_t   = uf_t ⊙ f_t + ub_t ⊙ g_t + ba_t
//! p_t   = sigmoid(a_t)
//! ```
//!
//! The loss is the summed binary cross-entropy of `p_t` against the
//! multi-hot positives of every layer. Gradients are computed analytically
//! for a single sample ([`backward`]) and for a mini-batch
//! ([`BinnParams::batch_loss_grad`]) using dense matrix products.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::hierarchy::LabelHierarchy;
use crate::linalg::{gemm, Matrix};
use crate::model::{logit_cross_entropy, multi_hot, sigmoid, Batch, Parameters, TensorView};

/// Initial value of both aggregation weight vectors.
pub const INITIAL_AGGREGATION_WEIGHT: f64 = 0.5;

/// Learnable tensors of one concept layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    /// `n_t × D` projection.
    pub proj_w: Matrix,
    pub proj_b: Vec<f64>,
    /// `n_t × n_{t-1}`; `None` on the coarsest layer.
    pub fwd_v: Option<Matrix>,
    /// `n_t × n_t`.
    pub fwd_h: Matrix,
    pub fwd_b: Vec<f64>,
    /// `n_t × n_{t+1}`; `None` on the finest layer.
    pub bwd_v: Option<Matrix>,
    pub bwd_h: Matrix,
    pub bwd_b: Vec<f64>,
    pub agg_fwd_u: Vec<f64>,
    pub agg_bwd_u: Vec<f64>,
    pub agg_b: Vec<f64>,
}

impl LayerParams {
    fn zeros(n: usize, d: usize, n_prev: Option<usize>, n_next: Option<usize>) -> Self {
        Self {
            proj_w: Matrix::zeros(n, d),
            proj_b: vec![0.0; n],
            fwd_v: n_prev.map(|p| Matrix::zeros(n, p)),
            fwd_h: Matrix::zeros(n, n),
            fwd_b: vec![0.0; n],
            bwd_v: n_next.map(|q| Matrix::zeros(n, q)),
            bwd_h: Matrix::zeros(n, n),
            bwd_b: vec![0.0; n],
            agg_fwd_u: vec![0.0; n],
            agg_bwd_u: vec![0.0; n],
            agg_b: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.proj_b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proj_b.is_empty()
    }
}

/// All BINN parameters, coarse layer first.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnParams {
    input_dim: usize,
    layers: Vec<LayerParams>,
}

impl BinnParams {
    /// All-zero parameters shaped for `layer_sizes` and input dimension `d`.
    pub fn zeros(layer_sizes: &[usize], d: usize) -> Self {
        let m = layer_sizes.len();
        let layers = (0..m)
            .map(|t| {
                LayerParams::zeros(
                    layer_sizes[t],
                    d,
                    (t > 0).then(|| layer_sizes[t - 1]),
                    (t + 1 < m).then(|| layer_sizes[t + 1]),
                )
            })
            .collect();
        Self {
            input_dim: d,
            layers,
        }
    }

    /// Glorot-uniform matrices, zero biases, aggregation weights of 0.5.
    pub fn init(h: &LabelHierarchy, d: usize, seed: u64) -> Self {
        let mut p = Self::zeros(&h.layer_sizes(), d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut p.layers {
            glorot(&mut layer.proj_w, &mut rng);
            if let Some(v) = &mut layer.fwd_v {
                glorot(v, &mut rng);
            }
            glorot(&mut layer.fwd_h, &mut rng);
            if let Some(v) = &mut layer.bwd_v {
                glorot(v, &mut rng);
            }
            glorot(&mut layer.bwd_h, &mut rng);
            layer.agg_fwd_u.fill(INITIAL_AGGREGATION_WEIGHT);
            layer.agg_bwd_u.fill(INITIAL_AGGREGATION_WEIGHT);
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(LayerParams::len).collect()
    }

    /// Zero tensor with the same shapes, for gradient accumulation.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.layer_sizes(), self.input_dim)
    }

    /// Projection of `x` into layer `t`.
    pub fn project(&self, x: &[f64], t: usize) -> Result<Vec<f64>> {
        check_dim(self.input_dim, x.len(), "BINN input")?;
        let layer = self.layers.get(t).ok_or(Error::LabelOutOfRange {
            layer: t,
            index: t,
            len: self.depth(),
        })?;
        let mut out = layer.proj_b.clone();
        layer.proj_w.matvec_add(x, &mut out);
        Ok(out)
    }

    /// Runs inference for a single feature vector.
    pub fn forward(&self, x: &[f64]) -> Result<BinnActivations> {
        check_dim(self.input_dim, x.len(), "BINN input")?;
        let m = self.depth();
        let x_t: Vec<Vec<f64>> = (0..m)
            .map(|t| self.project(x, t))
            .collect::<Result<_>>()?;

        let mut fwd_a: Vec<Vec<f64>> = Vec::with_capacity(m);
        for (t, layer) in self.layers.iter().enumerate() {
            let mut a = layer.fwd_b.clone();
            layer.fwd_h.matvec_add(&x_t[t], &mut a);
            if let Some(v) = &layer.fwd_v {
                v.matvec_add(&fwd_a[t - 1], &mut a);
            }
            fwd_a.push(a);
        }

        let mut bwd_a: Vec<Vec<f64>> = vec![Vec::new(); m];
        for t in (0..m).rev() {
            let layer = &self.layers[t];
            let mut a = layer.bwd_b.clone();
            layer.bwd_h.matvec_add(&x_t[t], &mut a);
            if let Some(v) = &layer.bwd_v {
                v.matvec_add(&bwd_a[t + 1], &mut a);
            }
            bwd_a[t] = a;
        }

        let mut agg = Vec::with_capacity(m);
        let mut probs = Vec::with_capacity(m);
        for (t, layer) in self.layers.iter().enumerate() {
            let a: Vec<f64> = (0..layer.len())
                .map(|i| {
                    layer.agg_fwd_u[i] * fwd_a[t][i]
                        + layer.agg_bwd_u[i] * bwd_a[t][i]
                        + layer.agg_b[i]
                })
                .collect();
            if !a.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("BINN activation at layer {t}")));
            }
            probs.push(a.iter().map(|&z| sigmoid(z)).collect());
            agg.push(a);
        }
        Ok(BinnActivations {
            x_t,
            fwd_a,
            bwd_a,
            a: agg,
            p: probs,
        })
    }

    /// Per-layer probabilities for `x`.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self.forward(x)?.p)
    }

    /// Batched predictions; row `i` of each returned matrix belongs to row
    /// `i` of `xs`.
    pub fn predict_batch(&self, xs: &Matrix) -> Result<Vec<Matrix>> {
        let acts = self.forward_batch(xs)?;
        Ok(acts
            .a
            .into_iter()
            .map(|mut a| {
                a.as_mut_slice().iter_mut().for_each(|z| *z = sigmoid(*z));
                a
            })
            .collect())
    }

    fn forward_batch(&self, xs: &Matrix) -> Result<BatchActivations> {
        check_dim(self.input_dim, xs.cols(), "BINN batch input")?;
        let b = xs.rows();
        let m = self.depth();
        let mut x_t = Vec::with_capacity(m);
        for layer in &self.layers {
            let n = layer.len();
            let mut out = broadcast_rows(&layer.proj_b, b);
            gemm(
                1.0,
                xs.as_slice(),
                b,
                self.input_dim,
                false,
                layer.proj_w.as_slice(),
                n,
                self.input_dim,
                true,
                1.0,
                out.as_mut_slice(),
            );
            x_t.push(out);
        }

        let mut fwd_a: Vec<Matrix> = Vec::with_capacity(m);
        for (t, layer) in self.layers.iter().enumerate() {
            let n = layer.len();
            let mut out = broadcast_rows(&layer.fwd_b, b);
            gemm_rows_by_transposed(1.0, &x_t[t], &layer.fwd_h, &mut out);
            if let Some(v) = &layer.fwd_v {
                gemm_rows_by_transposed(1.0, &fwd_a[t - 1], v, &mut out);
            }
            debug_assert_eq!(out.cols(), n);
            fwd_a.push(out);
        }

        let mut bwd_a: Vec<Matrix> = vec![Matrix::zeros(0, 0); m];
        for t in (0..m).rev() {
            let layer = &self.layers[t];
            let mut out = broadcast_rows(&layer.bwd_b, b);
            gemm_rows_by_transposed(1.0, &x_t[t], &layer.bwd_h, &mut out);
            if let Some(v) = &layer.bwd_v {
                gemm_rows_by_transposed(1.0, &bwd_a[t + 1], v, &mut out);
            }
            bwd_a[t] = out;
        }

        let mut agg = Vec::with_capacity(m);
        for (t, layer) in self.layers.iter().enumerate() {
            let n = layer.len();
            let mut a = Matrix::zeros(b, n);
            for r in 0..b {
                let (f, g) = (fwd_a[t].row(r), bwd_a[t].row(r));
                for (i, out) in a.row_mut(r).iter_mut().enumerate() {
                    *out = layer.agg_fwd_u[i] * f[i] + layer.agg_bwd_u[i] * g[i] + layer.agg_b[i];
                }
            }
            if !a.is_finite() {
                return Err(Error::NonFinite(format!("BINN activation at layer {t}")));
            }
            agg.push(a);
        }
        Ok(BatchActivations {
            x_t,
            fwd_a,
            bwd_a,
            a: agg,
        })
    }

    /// Summed loss over the batch; gradients are accumulated into `grads`
    /// (which is not cleared first).
    pub fn batch_loss_grad(&self, batch: &Batch<'_>, grads: &mut BinnParams) -> Result<f64> {
        let b = batch.len();
        let m = self.depth();
        let d = self.input_dim;
        for labels in &batch.labels {
            check_dim(m, labels.len(), "label layers")?;
        }
        let acts = self.forward_batch(&batch.x)?;

        // dE/da_t = p_t - y_t
        let mut loss = 0.0;
        let mut g_a: Vec<Matrix> = Vec::with_capacity(m);
        for (t, a) in acts.a.iter().enumerate() {
            let n = a.cols();
            let mut g = Matrix::zeros(b, n);
            for r in 0..b {
                let y = multi_hot(&batch.labels[r][t], n);
                for ((gi, &z), &yi) in g.row_mut(r).iter_mut().zip(a.row(r)).zip(&y) {
                    loss += logit_cross_entropy(z, yi > 0.5);
                    *gi = sigmoid(z) - yi;
                }
            }
            g_a.push(g);
        }

        // Gradients flowing into each directional activation.
        let mut g_fwd: Vec<Matrix> = vec![Matrix::zeros(0, 0); m];
        for t in (0..m).rev() {
            let layer = &self.layers[t];
            let mut g = scale_columns(&g_a[t], &layer.agg_fwd_u);
            if t + 1 < m {
                let v_next = self.layers[t + 1].fwd_v.as_ref().unwrap();
                gemm_rows_by(1.0, &g_fwd[t + 1], v_next, &mut g);
            }
            g_fwd[t] = g;
        }
        let mut g_bwd: Vec<Matrix> = Vec::with_capacity(m);
        for t in 0..m {
            let layer = &self.layers[t];
            let mut g = scale_columns(&g_a[t], &layer.agg_bwd_u);
            if t > 0 {
                let v_prev = self.layers[t - 1].bwd_v.as_ref().unwrap();
                gemm_rows_by(1.0, &g_bwd[t - 1], v_prev, &mut g);
            }
            g_bwd.push(g);
        }

        for t in 0..m {
            let layer = &self.layers[t];
            let gl = &mut grads.layers[t];
            let n = layer.len();

            for r in 0..b {
                let (ga, f, g) = (g_a[t].row(r), acts.fwd_a[t].row(r), acts.bwd_a[t].row(r));
                for i in 0..n {
                    gl.agg_fwd_u[i] += ga[i] * f[i];
                    gl.agg_bwd_u[i] += ga[i] * g[i];
                    gl.agg_b[i] += ga[i];
                }
            }

            accumulate_outer(&g_fwd[t], &acts.x_t[t], &mut gl.fwd_h);
            add_column_sums(&g_fwd[t], &mut gl.fwd_b);
            if let Some(gv) = &mut gl.fwd_v {
                accumulate_outer(&g_fwd[t], &acts.fwd_a[t - 1], gv);
            }
            accumulate_outer(&g_bwd[t], &acts.x_t[t], &mut gl.bwd_h);
            add_column_sums(&g_bwd[t], &mut gl.bwd_b);
            if let Some(gv) = &mut gl.bwd_v {
                accumulate_outer(&g_bwd[t], &acts.bwd_a[t + 1], gv);
            }

            // dE/dx_t = Hfᵀ g_fwd + Hbᵀ g_bwd
            let mut g_x = Matrix::zeros(b, n);
            gemm_rows_by(1.0, &g_fwd[t], &layer.fwd_h, &mut g_x);
            gemm_rows_by(1.0, &g_bwd[t], &layer.bwd_h, &mut g_x);
            gemm(
                1.0,
                g_x.as_slice(),
                b,
                n,
                true,
                batch.x.as_slice(),
                b,
                d,
                false,
                1.0,
                gl.proj_w.as_mut_slice(),
            );
            add_column_sums(&g_x, &mut gl.proj_b);
        }

        if !loss.is_finite() {
            return Err(Error::NonFinite("BINN batch loss".into()));
        }
        Ok(loss)
    }
}

fn glorot(m: &mut Matrix, rng: &mut ChaCha8Rng) {
    let bound = (6.0 / (m.rows() + m.cols()) as f64).sqrt();
    for v in m.as_mut_slice() {
        *v = rng.gen_range(-bound..=bound);
    }
}

fn broadcast_rows(v: &[f64], rows: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, v.len());
    for r in 0..rows {
        m.row_mut(r).copy_from_slice(v);
    }
    m
}

/// `out += alpha · a · wᵀ`
fn gemm_rows_by_transposed(alpha: f64, a: &Matrix, w: &Matrix, out: &mut Matrix) {
    gemm(
        alpha,
        a.as_slice(),
        a.rows(),
        a.cols(),
        false,
        w.as_slice(),
        w.rows(),
        w.cols(),
        true,
        1.0,
        out.as_mut_slice(),
    );
}

/// `out += alpha · a · w`
fn gemm_rows_by(alpha: f64, a: &Matrix, w: &Matrix, out: &mut Matrix) {
    gemm(
        alpha,
        a.as_slice(),
        a.rows(),
        a.cols(),
        false,
        w.as_slice(),
        w.rows(),
        w.cols(),
        false,
        1.0,
        out.as_mut_slice(),
    );
}

/// `acc += gᵀ · x` (sum over batch rows of outer products).
fn accumulate_outer(g: &Matrix, x: &Matrix, acc: &mut Matrix) {
    gemm(
        1.0,
        g.as_slice(),
        g.rows(),
        g.cols(),
        true,
        x.as_slice(),
        x.rows(),
        x.cols(),
        false,
        1.0,
        acc.as_mut_slice(),
    );
}

fn add_column_sums(g: &Matrix, acc: &mut [f64]) {
    for r in 0..g.rows() {
        for (a, v) in acc.iter_mut().zip(g.row(r)) {
            *a += v;
        }
    }
}

fn scale_columns(g: &Matrix, u: &[f64]) -> Matrix {
    let mut out = g.clone();
    for r in 0..out.rows() {
        for (v, s) in out.row_mut(r).iter_mut().zip(u) {
            *v *= s;
        }
    }
    out
}

struct BatchActivations {
    x_t: Vec<Matrix>,
    fwd_a: Vec<Matrix>,
    bwd_a: Vec<Matrix>,
    a: Vec<Matrix>,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnActivations {
    pub x_t: Vec<Vec<f64>>,
    pub fwd_a: Vec<Vec<f64>>,
    pub bwd_a: Vec<Vec<f64>>,
    pub a: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
}

/// Cross-entropy of the activations against per-layer positive sets.
pub fn loss(acts: &BinnActivations, labels: &[Vec<usize>]) -> Result<f64> {
    check_dim(acts.a.len(), labels.len(), "label layers")?;
    let mut total = 0.0;
    for (t, (a, positives)) in acts.a.iter().zip(labels).enumerate() {
        let y = checked_multi_hot(positives, a.len(), t)?;
        total += a
            .iter()
            .zip(&y)
            .map(|(&z, &yi)| logit_cross_entropy(z, yi > 0.5))
            .sum::<f64>();
    }
    Ok(total)
}

fn checked_multi_hot(positives: &[usize], n: usize, layer: usize) -> Result<Vec<f64>> {
    if let Some(&bad) = positives.iter().find(|&&i| i >= n) {
        return Err(Error::LabelOutOfRange {
            layer,
            index: bad,
            len: n,
        });
    }
    Ok(multi_hot(positives, n))
}

/// Gradients of the single-sample loss.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnGradients {
    pub params: BinnParams,
    pub x: Vec<f64>,
}

/// Loss and exact gradients for one sample, by reverse-mode through the
/// per-sample forward pass.
pub fn backward(
    params: &BinnParams,
    x: &[f64],
    labels: &[Vec<usize>],
) -> Result<(f64, BinnGradients)> {
    let acts = params.forward(x)?;
    let value = loss(&acts, labels)?;
    let m = params.depth();

    let g_a: Vec<Vec<f64>> = (0..m)
        .map(|t| {
            let y = checked_multi_hot(&labels[t], acts.p[t].len(), t)?;
            Ok(acts.p[t].iter().zip(&y).map(|(p, y)| p - y).collect())
        })
        .collect::<Result<_>>()?;

    let mut g_fwd: Vec<Vec<f64>> = vec![Vec::new(); m];
    for t in (0..m).rev() {
        let layer = &params.layers[t];
        let mut g: Vec<f64> = g_a[t]
            .iter()
            .zip(&layer.agg_fwd_u)
            .map(|(g, u)| g * u)
            .collect();
        if t + 1 < m {
            params.layers[t + 1]
                .fwd_v
                .as_ref()
                .unwrap()
                .matvec_t_add(&g_fwd[t + 1], &mut g);
        }
        g_fwd[t] = g;
    }
    let mut g_bwd: Vec<Vec<f64>> = Vec::with_capacity(m);
    for t in 0..m {
        let layer = &params.layers[t];
        let mut g: Vec<f64> = g_a[t]
            .iter()
            .zip(&layer.agg_bwd_u)
            .map(|(g, u)| g * u)
            .collect();
        if t > 0 {
            params.layers[t - 1]
                .bwd_v
                .as_ref()
                .unwrap()
                .matvec_t_add(&g_bwd[t - 1], &mut g);
        }
        g_bwd.push(g);
    }

    let mut grads = params.zeros_like();
    let mut grad_x = vec![0.0; params.input_dim];
    for t in 0..m {
        let layer = &params.layers[t];
        let gl = &mut grads.layers[t];
        for i in 0..layer.len() {
            gl.agg_fwd_u[i] = g_a[t][i] * acts.fwd_a[t][i];
            gl.agg_bwd_u[i] = g_a[t][i] * acts.bwd_a[t][i];
            gl.agg_b[i] = g_a[t][i];
        }
        gl.fwd_h.add_outer(&g_fwd[t], &acts.x_t[t]);
        gl.fwd_b.copy_from_slice(&g_fwd[t]);
        if let Some(gv) = &mut gl.fwd_v {
            gv.add_outer(&g_fwd[t], &acts.fwd_a[t - 1]);
        }
        gl.bwd_h.add_outer(&g_bwd[t], &acts.x_t[t]);
        gl.bwd_b.copy_from_slice(&g_bwd[t]);
        if let Some(gv) = &mut gl.bwd_v {
            gv.add_outer(&g_bwd[t], &acts.bwd_a[t + 1]);
        }

        let mut g_x = vec![0.0; layer.len()];
        layer.fwd_h.matvec_t_add(&g_fwd[t], &mut g_x);
        layer.bwd_h.matvec_t_add(&g_bwd[t], &mut g_x);
        gl.proj_w.add_outer(&g_x, x);
        gl.proj_b.copy_from_slice(&g_x);
        layer.proj_w.matvec_t_add(&g_x, &mut grad_x);
    }

    if !grads.all_finite() || !grad_x.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("BINN gradient".into()));
    }
    Ok((
        value,
        BinnGradients {
            params: grads,
            x: grad_x,
        },
    ))
}

impl Parameters for BinnParams {
    fn tensors(&self) -> Vec<TensorView<'_>> {
        fn view<'a>(t: usize, name: &str, shape: [usize; 2], data: &'a [f64]) -> TensorView<'a> {
            TensorView {
                name: format!("layer{t}.{name}"),
                shape,
                data,
            }
        }
        let mut out = Vec::new();
        for (t, l) in self.layers.iter().enumerate() {
            let n = l.len();
            out.push(view(t, "proj_w", [n, self.input_dim], l.proj_w.as_slice()));
            out.push(view(t, "proj_b", [n, 1], &l.proj_b));
            if let Some(v) = &l.fwd_v {
                out.push(view(t, "fwd_v", [n, v.cols()], v.as_slice()));
            }
            out.push(view(t, "fwd_h", [n, n], l.fwd_h.as_slice()));
            out.push(view(t, "fwd_b", [n, 1], &l.fwd_b));
            if let Some(v) = &l.bwd_v {
                out.push(view(t, "bwd_v", [n, v.cols()], v.as_slice()));
            }
            out.push(view(t, "bwd_h", [n, n], l.bwd_h.as_slice()));
            out.push(view(t, "bwd_b", [n, 1], &l.bwd_b));
            out.push(view(t, "agg_fwd_u", [n, 1], &l.agg_fwd_u));
            out.push(view(t, "agg_bwd_u", [n, 1], &l.agg_bwd_u));
            out.push(view(t, "agg_b", [n, 1], &l.agg_b));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            out.push(l.proj_w.as_mut_slice());
            out.push(&mut l.proj_b);
            if let Some(v) = &mut l.fwd_v {
                out.push(v.as_mut_slice());
            }
            out.push(l.fwd_h.as_mut_slice());
            out.push(&mut l.fwd_b);
            if let Some(v) = &mut l.bwd_v {
                out.push(v.as_mut_slice());
            }
            out.push(l.bwd_h.as_mut_slice());
            out.push(&mut l.bwd_b);
            out.push(&mut l.agg_fwd_u);
            out.push(&mut l.agg_bwd_u);
            out.push(&mut l.agg_b);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn hierarchy(sizes: &[usize]) -> LabelHierarchy {
        let v: Vec<String> = (0..sizes[0]).map(|i| format!("v{i}")).collect();
        let e: Vec<String> = (0..sizes[1]).map(|i| format!("e{i}")).collect();
        let parents = (0..sizes[1]).map(|i| vec![i % sizes[0]]).collect();
        LabelHierarchy::two_layer(v, e, parents).unwrap()
    }

    /// Random parameters with every tensor (biases and U included) nonzero.
    fn random_params(sizes: &[usize], d: usize, seed: u64) -> BinnParams {
        let mut p = BinnParams::zeros(sizes, d);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in p.tensors_mut() {
            for v in t.iter_mut() {
                *v = rng.gen_range(-0.8..0.8);
            }
        }
        p
    }

    #[test]
    fn init_is_deterministic_with_specified_values() {
        let h = hierarchy(&[3, 7]);
        let a = BinnParams::init(&h, 10, 42);
        let b = BinnParams::init(&h, 10, 42);
        assert_eq!(a, b);
        assert_ne!(a, BinnParams::init(&h, 10, 43));
        for l in a.layers() {
            assert!(l.proj_b.iter().chain(&l.fwd_b).chain(&l.bwd_b).chain(&l.agg_b).all(|&v| v == 0.0));
            assert!(l.agg_fwd_u.iter().chain(&l.agg_bwd_u).all(|&v| v == 0.5));
            let bound = (6.0 / (l.len() + 10) as f64).sqrt();
            assert!(l.proj_w.as_slice().iter().all(|v| v.abs() <= bound));
        }
    }

    #[test]
    fn project_simple_cases() {
        let mut p = BinnParams::zeros(&[2], 2);
        p.layers[0].proj_w = Matrix::identity(2);
        assert_eq!(p.project(&[1.0, 2.0], 0).unwrap(), vec![1.0, 2.0]);
        p.layers[0].proj_w = Matrix::zeros(2, 2);
        p.layers[0].proj_b = vec![5.0, 6.0];
        assert_eq!(p.project(&[1.0, 2.0], 0).unwrap(), vec![5.0, 6.0]);
        assert!(p.project(&[1.0], 0).is_err());
    }

    #[test]
    fn project_matches_double_loop() {
        let p = random_params(&[3], 8, 1);
        let x: Vec<f64> = (0..8).map(|i| (i as f64 - 3.5) * 0.3).collect();
        let got = p.project(&x, 0).unwrap();
        let l = &p.layers[0];
        for r in 0..3 {
            let mut s = l.proj_b[r];
            for c in 0..8 {
                s += l.proj_w[(r, c)] * x[c];
            }
            assert!((got[r] - s).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_params_give_half_and_ln2_loss() {
        let p = BinnParams::zeros(&[2, 3], 4);
        let acts = p.forward(&[1.0, -2.0, 0.5, 3.0]).unwrap();
        assert!(acts.p.iter().flatten().all(|&v| v == 0.5));
        let l = loss(&acts, &[vec![1], vec![0, 2]]).unwrap();
        assert!((l - 5.0 * LN_2).abs() < 1e-12);
    }

    #[test]
    fn single_layer_has_no_messages() {
        let p = random_params(&[4], 3, 8);
        assert!(p.layers[0].fwd_v.is_none() && p.layers[0].bwd_v.is_none());
        let x = [0.2, -0.4, 1.0];
        let acts = p.forward(&x).unwrap();
        let l = &p.layers[0];
        let x1 = p.project(&x, 0).unwrap();
        let mut f = l.fwd_b.clone();
        l.fwd_h.matvec_add(&x1, &mut f);
        let mut g = l.bwd_b.clone();
        l.bwd_h.matvec_add(&x1, &mut g);
        for i in 0..4 {
            let a = l.agg_fwd_u[i] * f[i] + l.agg_bwd_u[i] * g[i] + l.agg_b[i];
            assert!((acts.a[0][i] - a).abs() < 1e-14);
        }
    }

    #[test]
    fn near_perfect_logits_give_near_zero_loss() {
        let mut p = BinnParams::zeros(&[2, 3], 1);
        for l in &mut p.layers {
            l.agg_b = vec![-40.0; l.len()];
        }
        p.layers[0].agg_b[1] = 40.0;
        p.layers[1].agg_b[2] = 40.0;
        let acts = p.forward(&[0.0]).unwrap();
        let l = loss(&acts, &[vec![1], vec![2]]).unwrap();
        assert!(l >= 0.0 && l < 1e-15);
        assert!(loss(&acts, &[vec![5], vec![2]]).is_err());
    }

    #[test]
    fn pre_activation_gradient_is_p_minus_y() {
        let p = random_params(&[2, 3], 4, 12);
        let x = [0.3, -1.0, 0.25, 0.8];
        let labels = vec![vec![0], vec![1, 2]];
        let (_, g) = backward(&p, &x, &labels).unwrap();
        let acts = p.forward(&x).unwrap();
        for t in 0..2 {
            let y = multi_hot(&labels[t], acts.p[t].len());
            for i in 0..y.len() {
                assert!((g.params.layers[t].agg_b[i] - (acts.p[t][i] - y[i])).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn batch_gradient_equals_sum_of_single_sample_gradients() {
        let p = random_params(&[3, 5], 6, 77);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<Vec<f64>> = (0..7)
            .map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<Vec<Vec<usize>>> = (0..7)
            .map(|i| vec![vec![i % 3], vec![i % 5, (i + 2) % 5]])
            .collect();

        let mut expect = p.zeros_like();
        let mut expect_loss = 0.0;
        for (x, y) in xs.iter().zip(&labels) {
            let (l, g) = backward(&p, x, y).unwrap();
            expect_loss += l;
            for (acc, v) in expect.tensors_mut().into_iter().zip(g.params.tensors()) {
                for (a, b) in acc.iter_mut().zip(v.data) {
                    *a += b;
                }
            }
        }

        let batch = Batch {
            x: Matrix::from_vec(7, 6, xs.concat()).unwrap(),
            labels: labels.iter().map(Vec::as_slice).collect(),
        };
        let mut got = p.zeros_like();
        let got_loss = p.batch_loss_grad(&batch, &mut got).unwrap();
        assert!((got_loss - expect_loss).abs() < 1e-10);
        for (a, b) in got.tensors().iter().zip(expect.tensors()) {
            for (x, y) in a.data.iter().zip(b.data) {
                assert!((x - y).abs() < 1e-10, "{}", a.name);
            }
        }

        let probs = p.predict_batch(&batch.x).unwrap();
        for (r, x) in xs.iter().enumerate() {
            let single = p.predict(x).unwrap();
            for t in 0..2 {
                for (i, v) in single[t].iter().enumerate() {
                    assert!((probs[t][(r, i)] - v).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn tensor_lists_align() {
        let mut p = random_params(&[2, 3, 4], 5, 3);
        let names: Vec<String> = p.tensors().into_iter().map(|t| t.name).collect();
        let lens: Vec<usize> = p.tensors().iter().map(|t| t.data.len()).collect();
        let lens_mut: Vec<usize> = p.tensors_mut().iter().map(|t| t.len()).collect();
        assert_eq!(lens, lens_mut);
        assert!(names.contains(&"layer1.fwd_v".to_string()));
        assert!(!names.contains(&"layer0.fwd_v".to_string()));
        assert!(!names.contains(&"layer2.bwd_v".to_string()));
    }
}

//! Adam with decoupled weight decay and a step learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Parameters;

/// Optimizer hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub base_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub decay_factor: f64,
    /// Iterations between learning-rate decays; 0 disables decay.
    pub decay_every: u64,
}

impl AdamConfig {
    /// BINN schedule: 1e-3, ×0.1 every 40k steps, weight decay 1e-8.
    pub fn binn() -> Self {
        Self {
            base_lr: 1e-3,
            decay_factor: 0.1,
            decay_every: 40_000,
            ..Self::default()
        }
    }

    /// Baseline schedule: constant 1e-2.
    pub fn logreg() -> Self {
        Self {
            base_lr: 1e-2,
            decay_every: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.base_lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0
            && self.decay_factor > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            base_lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-8,
            decay_factor: 0.1,
            decay_every: 40_000,
        }
    }
}

/// Moment estimates and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    /// Completed updates.
    pub step: u64,
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &impl Parameters) -> Self {
        let zeros: Vec<Vec<f64>> = params
            .tensors()
            .iter()
            .map(|t| vec![0.0; t.data.len()])
            .collect();
        Self {
            config,
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    /// `base_lr · decay_factor^⌊step / decay_every⌋`
    pub fn current_lr(&self) -> f64 {
        lr_at(&self.config, self.step)
    }

    /// Applies one bias-corrected Adam update followed by decoupled weight
    /// decay. Uses the learning rate in effect before the step counter
    /// advances.
    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let lr = self.current_lr();
        let c = self.config;
        let t = self.step + 1;
        let bc1 = 1.0 - c.beta1.powf(t as f64);
        let bc2 = 1.0 - c.beta2.powf(t as f64);
        let g_tensors = grads.tensors();
        let p_tensors = params.tensors_mut();
        if g_tensors.len() != p_tensors.len() || p_tensors.len() != self.first_moment.len() {
            return Err(Error::Dimension {
                expected: self.first_moment.len(),
                actual: p_tensors.len(),
                context: "optimizer tensor count",
            });
        }
        for (((p, g), m), v) in p_tensors
            .into_iter()
            .zip(&g_tensors)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            if p.len() != g.data.len() || p.len() != m.len() {
                return Err(Error::Shape {
                    name: g.name.clone(),
                    expected: vec![m.len()],
                    found: vec![g.data.len()],
                });
            }
            for i in 0..p.len() {
                let gi = g.data[i];
                m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * gi;
                v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                let update = lr * m_hat / (v_hat.sqrt() + c.eps) + lr * c.weight_decay * p[i];
                if !update.is_finite() {
                    return Err(Error::NonFinite(format!("Adam update for {}", g.name)));
                }
                p[i] -= update;
            }
        }
        self.step = t;
        Ok(())
    }
}

/// Learning rate after `step` completed updates.
pub fn lr_at(c: &AdamConfig, step: u64) -> f64 {
    if c.decay_every == 0 {
        return c.base_lr;
    }
    let k = (step / c.decay_every) as i32;
    c.base_lr / (1.0 / c.decay_factor).powi(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TensorView;

    #[derive(Clone)]
    struct Vector(Vec<f64>);

    impl Parameters for Vector {
        fn tensors(&self) -> Vec<TensorView<'_>> {
            vec![TensorView {
                name: "w".into(),
                shape: [self.0.len(), 1],
                data: &self.0,
            }]
        }
        fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
            vec![&mut self.0]
        }
    }

    #[test]
    fn schedule_boundaries() {
        let c = AdamConfig::binn();
        assert_eq!(lr_at(&c, 0), 0.001);
        assert_eq!(lr_at(&c, 39_999), 0.001);
        assert_eq!(lr_at(&c, 40_000), 0.0001);
        assert_eq!(lr_at(&c, 80_000), 0.00001);
        assert_eq!(lr_at(&AdamConfig::logreg(), 1_000_000), 0.01);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let c = AdamConfig {
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        let mut w = Vector(vec![1.0, -2.0]);
        let mut s = AdamState::new(c, &w);
        for _ in 0..10 {
            s.step(&mut w, &Vector(vec![0.0, 0.0])).unwrap();
        }
        assert_eq!(w.0, vec![1.0, -2.0]);
        assert_eq!(s.step, 10);
    }

    #[test]
    fn constant_gradient_step_tends_to_lr() {
        let c = AdamConfig {
            base_lr: 0.01,
            weight_decay: 0.0,
            decay_every: 0,
            ..AdamConfig::default()
        };
        let mut w = Vector(vec![0.0]);
        let mut s = AdamState::new(c, &w);
        let mut last = 0.0;
        for _ in 0..2000 {
            let before = w.0[0];
            s.step(&mut w, &Vector(vec![3.7])).unwrap();
            last = before - w.0[0];
        }
        assert!((last - 0.01).abs() < 0.01 * 0.01);
    }

    #[test]
    fn quadratic_bowl_converges() {
        let c = AdamConfig {
            base_lr: 0.01,
            weight_decay: 0.0,
            decay_every: 0,
            ..AdamConfig::default()
        };
        let mut w = Vector(vec![1.0, -0.5, 2.0]);
        let mut s = AdamState::new(c, &w);
        for _ in 0..5000 {
            let g = Vector(w.0.iter().map(|v| 2.0 * v).collect());
            s.step(&mut w, &g).unwrap();
        }
        let norm = w.0.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-3, "{norm}");
    }

    #[test]
    fn gradient_scale_does_not_change_steps() {
        let c = AdamConfig {
            eps: 0.0,
            weight_decay: 0.0,
            ..AdamConfig::default()
        };
        let mut a = Vector(vec![0.3, -0.1]);
        let mut b = a.clone();
        let (mut sa, mut sb) = (AdamState::new(c, &a), AdamState::new(c, &b));
        for k in 0..50 {
            let g = vec![0.5 + k as f64 * 0.01, -1.0];
            sa.step(&mut a, &Vector(g.clone())).unwrap();
            sb.step(&mut b, &Vector(g.iter().map(|v| v * 1000.0).collect()))
                .unwrap();
        }
        for (x, y) in a.0.iter().zip(&b.0) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn decoupled_weight_decay_shrinks() {
        let c = AdamConfig {
            base_lr: 0.1,
            weight_decay: 0.5,
            decay_every: 0,
            ..AdamConfig::default()
        };
        let mut w = Vector(vec![2.0]);
        let mut s = AdamState::new(c, &w);
        s.step(&mut w, &Vector(vec![0.0])).unwrap();
        assert!((w.0[0] - (2.0 - 0.1 * 0.5 * 2.0)).abs() < 1e-15);
    }
}

//! Bias-corrected Adam.

use super::{Result, TrainConfig, TrainError};
use crate::model::layers::cast;
use crate::model::{Network, Scalar};
use std::collections::HashMap;

/// One Adam update over a flat parameter slice. `t` is the step number
/// *after* incrementing (the first update runs with `t = 1`):
///
/// m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2;
/// p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
#[allow(clippy::too_many_arguments)]
pub fn adam_update<F: Scalar>(
    param: &mut [F],
    grad: &[F],
    m: &mut [F],
    v: &mut [F],
    t: u64,
    lr: F,
    beta1: F,
    beta2: F,
    eps: F,
) {
    debug_assert!(t >= 1);
    let one = F::one();
    let bc1 = one - beta1.powi(t as i32);
    let bc2 = one - beta2.powi(t as i32);
    for i in 0..param.len() {
        let g = grad[i];
        m[i] = beta1 * m[i] + (one - beta1) * g;
        v[i] = beta2 * v[i] + (one - beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        param[i] = param[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Optimizer state: first/second moment buffers keyed by parameter name
/// plus the global step counter (one increment per batch).
pub struct AdamOptimizer<F> {
    m: HashMap<String, Vec<F>>,
    v: HashMap<String, Vec<F>>,
    t: u64,
    lr: F,
    beta1: F,
    beta2: F,
    eps: F,
}

impl<F: Scalar> AdamOptimizer<F> {
    pub fn new(config: &TrainConfig) -> Self {
        AdamOptimizer {
            m: HashMap::new(),
            v: HashMap::new(),
            t: 0,
            lr: cast(config.learning_rate),
            beta1: cast(config.beta1),
            beta2: cast(config.beta2),
            eps: cast(config.epsilon),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// Applies one update from the gradients accumulated in the network.
    /// A non-finite gradient aborts the step before touching any state.
    pub fn step(&mut self, network: &mut Network<F>) -> Result<()> {
        if let Some(name) = network.first_non_finite_grad() {
            return Err(TrainError::NonFiniteGradient(name));
        }
        self.t += 1;
        let t = self.t;
        let (lr, beta1, beta2, eps) = (self.lr, self.beta1, self.beta2, self.eps);
        let (m_map, v_map) = (&mut self.m, &mut self.v);
        network.visit_trainable_mut(&mut |name, mut value, grad| {
            let n = value.len();
            let m = m_map
                .entry(name.to_string())
                .or_insert_with(|| vec![F::zero(); n]);
            let v = v_map
                .entry(name.to_string())
                .or_insert_with(|| vec![F::zero(); n]);
            let param = value.as_slice_mut().expect("contiguous parameter");
            let grad = grad.to_owned();
            let grad = grad.as_slice().expect("contiguous gradient");
            adam_update(param, grad, m, v, t, lr, beta1, beta2, eps);
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_config() -> TrainConfig {
        TrainConfig::new(1)
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = [0.3f64, -0.7];
        let g = [0.0, 0.0];
        let (mut m, mut v) = ([0.0; 2], [0.0; 2]);
        adam_update(&mut p, &g, &mut m, &mut v, 1, 1e-4, 0.9, 0.999, 1e-8);
        assert_eq!(p, [0.3, -0.7]);
    }

    #[test]
    fn first_step_matches_hand_derived_value() {
        // At t=1 with g=1: m_hat = v_hat = 1, so dw = -lr / (1 + eps).
        let cfg = paper_config();
        let mut p = [0.0f64];
        let (mut m, mut v) = ([0.0], [0.0]);
        adam_update(
            &mut p,
            &[1.0],
            &mut m,
            &mut v,
            1,
            cfg.learning_rate,
            cfg.beta1,
            cfg.beta2,
            cfg.epsilon,
        );
        let expected = -cfg.learning_rate / (1.0 + cfg.epsilon);
        assert!((p[0] - expected).abs() < 1e-12);
        assert!((p[0] - (-9.999_999_99e-5)).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_is_identity_but_state_advances() {
        let mut p = [1.0f64, 2.0];
        let (mut m, mut v) = ([0.0; 2], [0.0; 2]);
        adam_update(&mut p, &[0.5, -0.5], &mut m, &mut v, 1, 0.0, 0.9, 0.999, 1e-8);
        assert_eq!(p, [1.0, 2.0]);
        assert!(m[0] != 0.0 && v[0] != 0.0);
    }

    /// Straight-line transcription of the recurrence, kept deliberately
    /// separate from `adam_update`.
    fn scalar_oracle(steps: &[f64], lr: f64, b1: f64, b2: f64, eps: f64) -> f64 {
        let (mut w, mut m, mut v) = (0.0f64, 0.0f64, 0.0f64);
        for (k, &g) in steps.iter().enumerate() {
            let t = (k + 1) as i32;
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let m_hat = m / (1.0 - b1.powi(t));
            let v_hat = v / (1.0 - b2.powi(t));
            w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        w
    }

    #[test]
    fn two_constant_steps_match_scalar_oracle() {
        let cfg = paper_config();
        let mut p = [0.0f64];
        let (mut m, mut v) = ([0.0], [0.0]);
        for t in 1..=2 {
            adam_update(
                &mut p,
                &[1.0],
                &mut m,
                &mut v,
                t,
                cfg.learning_rate,
                cfg.beta1,
                cfg.beta2,
                cfg.epsilon,
            );
        }
        let want = scalar_oracle(&[1.0, 1.0], cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
        assert!((p[0] - want).abs() < 1e-12);
    }

    #[test]
    fn optimizer_rejects_non_finite_gradients() {
        let model_cfg = crate::model::ModelConfig {
            input_height: 32,
            input_width: 32,
            width_multiplier: 1.0 / 16.0,
            middle_module_count: 0,
            num_classes: 2,
            seed: 1,
        };
        let mut net = crate::model::build_network::<f32>(&model_cfg).unwrap();
        // NaN input pixels poison the accumulated gradients.
        let x = ndarray::Array4::<f32>::from_elem((1, 3, 32, 32), f32::NAN);
        let (logits, cache) = net.forward_train(x).unwrap();
        let grad = logits.mapv(|_| 1.0f32);
        net.backward(&cache, &grad);
        assert!(net.first_non_finite_grad().is_some());
        let mut opt = AdamOptimizer::<f32>::new(&paper_config());
        assert!(matches!(
            opt.step(&mut net),
            Err(TrainError::NonFiniteGradient(_))
        ));
        assert_eq!(opt.step_count(), 0);
    }
}

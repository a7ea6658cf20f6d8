use serde::{Deserialize, Serialize};

use super::network::PolicyParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Bias-corrected Adam update on raw slices. `step` is the count after this update.
pub fn adam_update(
    weights: &mut [f64],
    m: &mut [f64],
    v: &mut [f64],
    step: u64,
    grads: &[f64],
    cfg: &AdamConfig,
) -> Result<()> {
    if weights.len() != grads.len() || m.len() != grads.len() || v.len() != grads.len() {
        return Err(Error::Shape("adam buffers do not match gradient length".into()));
    }
    if let Some(k) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Diverged(format!("non-finite gradient at index {k}")));
    }
    let t = step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for k in 0..grads.len() {
        let g = grads[k];
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[k] / c1;
        let v_hat = v[k] / c2;
        weights[k] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.eps);
    }
    Ok(())
}

/// One Adam step on the policy, incrementing its step counter.
pub fn adam_step(params: &mut PolicyParams, grads: &[f64], cfg: &AdamConfig) -> Result<()> {
    if grads.len() != params.weights.len() {
        return Err(Error::Shape(format!(
            "gradient has {} entries, params have {}",
            grads.len(),
            params.weights.len()
        )));
    }
    let step = params.adam.step + 1;
    adam_update(
        &mut params.weights,
        &mut params.adam.m,
        &mut params.adam.v,
        step,
        grads,
        cfg,
    )?;
    params.adam.step = step;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_weights() {
        let mut w = [1.0, -2.0];
        let (mut m, mut v) = ([0.0; 2], [0.0; 2]);
        adam_update(&mut w, &mut m, &mut v, 1, &[0.0, 0.0], &AdamConfig::default()).unwrap();
        assert_eq!(w, [1.0, -2.0]);
    }

    #[test]
    fn first_step_closed_form() {
        // m_hat = g, v_hat = g^2 => delta = -lr * g / (|g| + eps)
        let cfg = AdamConfig::with_lr(1e-4);
        for g in [0.5, -3.0, 1e-3] {
            let mut w = [0.0];
            let (mut m, mut v) = ([0.0], [0.0]);
            adam_update(&mut w, &mut m, &mut v, 1, &[g], &cfg).unwrap();
            let expected = -1e-4 * g / (g.abs() + 1e-8);
            assert!((w[0] - expected).abs() < 1e-18, "g {g}: {} vs {expected}", w[0]);
        }
    }

    #[test]
    fn repeated_gradient_moves_monotonically() {
        let cfg = AdamConfig::with_lr(1e-2);
        let mut w = [0.0];
        let (mut m, mut v) = ([0.0], [0.0]);
        let mut last = 0.0;
        for t in 1..=10 {
            adam_update(&mut w, &mut m, &mut v, t, &[0.4], &cfg).unwrap();
            assert!(w[0] < last);
            // constant gradients keep the bias-corrected ratio at 1
            assert!((w[0] + 1e-2 * t as f64 * 0.4 / (0.4 + 1e-8)).abs() < 1e-12);
            last = w[0];
        }
    }

    #[test]
    fn non_finite_gradient_diverges() {
        let mut w = [0.0];
        let (mut m, mut v) = ([0.0], [0.0]);
        let err = adam_update(&mut w, &mut m, &mut v, 1, &[f64::NAN], &AdamConfig::default());
        assert!(matches!(err, Err(Error::Diverged(_))));
    }
}

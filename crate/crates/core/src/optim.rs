//! Adam optimizer and the stepped learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::autodiff::ParamStore;
use crate::error::{Error, Result};

/// Adam hyperparameters. The learning rate is passed per step so a schedule
/// can drive it; everything else is fixed for a run.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled weight decay: `theta -= lr * weight_decay * theta`
    /// applied alongside the Adam update. Zero disables it.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// One Adam update over every parameter in the store, consuming the
/// currently accumulated gradients:
///
/// ```text
/// m <- beta1*m + (1-beta1)*g          v <- beta2*v + (1-beta2)*g^2
/// m_hat = m / (1 - beta1^t)           v_hat = v / (1 - beta2^t)
/// theta <- theta - lr * (m_hat / (sqrt(v_hat) + epsilon) + weight_decay*theta)
/// ```
///
/// `t` counts steps per parameter starting at 1. Gradients are left in place;
/// callers zero them before the next accumulation.
pub fn adam_step(store: &mut ParamStore, cfg: &AdamConfig, lr: f64) -> Result<()> {
    if !lr.is_finite() || lr < 0.0 {
        return Err(Error::Config(format!("learning rate must be >= 0, got {lr}")));
    }
    for (_, p) in store.iter_mut() {
        p.steps += 1;
        let t = p.steps as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        let n = p.value.numel();
        for i in 0..n {
            let g = p.grad.data()[i];
            let m = cfg.beta1 * p.m.data()[i] + (1.0 - cfg.beta1) * g;
            let v = cfg.beta2 * p.v.data()[i] + (1.0 - cfg.beta2) * g * g;
            p.m.data_mut()[i] = m;
            p.v.data_mut()[i] = v;
            let m_hat = m / bc1;
            let v_hat = v / bc2;
            let theta = p.value.data()[i];
            let update = m_hat / (v_hat.sqrt() + cfg.epsilon) + cfg.weight_decay * theta;
            p.value.data_mut()[i] = theta - lr * update;
        }
        p.value.check_finite(&format!("parameter {} after adam step", p.name))?;
    }
    Ok(())
}

/// Stepped decay: `lr0 * factor^floor(epoch / period)` with 0-based epochs.
pub fn step_lr(lr0: f64, factor: f64, period: usize, epoch: usize) -> Result<f64> {
    if period == 0 {
        return Err(Error::Config("lr schedule period must be positive".into()));
    }
    Ok(lr0 * factor.powi((epoch / period) as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    /// First Adam step with bias correction collapses to
    /// theta - lr * g / (|g| + eps), independent of gradient magnitude's
    /// effect through m/v (both corrections cancel at t=1).
    #[test]
    fn first_step_matches_closed_form() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::new(vec![2], vec![1.0, -2.0]).unwrap());
        store.get_mut(id).grad = Tensor::new(vec![2], vec![0.5, -3.0]).unwrap();
        adam_step(&mut store, &AdamConfig::default(), 0.1).unwrap();
        let eps = 1e-8;
        let expect0 = 1.0 - 0.1 * (0.5 / (0.5 + eps));
        let expect1 = -2.0 - 0.1 * (-3.0 / (3.0 + eps));
        let got = store.value(id).data();
        assert!((got[0] - expect0).abs() < 1e-15);
        assert!((got[1] - expect1).abs() < 1e-15);
    }

    #[test]
    fn zero_lr_is_a_noop_but_advances_state() {
        let mut store = ParamStore::new();
        let id = store.add("w", Tensor::new(vec![1], vec![7.0]).unwrap());
        store.get_mut(id).grad = Tensor::new(vec![1], vec![1.0]).unwrap();
        adam_step(&mut store, &AdamConfig::default(), 0.0).unwrap();
        assert_eq!(store.value(id).data(), &[7.0]);
        assert_eq!(store.get(id).steps, 1);
        assert!(store.get(id).m.data()[0] != 0.0);
    }

    #[test]
    fn step_lr_halves_on_schedule() {
        for (epoch, expect) in [(0, 1e-3), (99, 1e-3), (100, 5e-4), (250, 2.5e-4)] {
            let lr = step_lr(1e-3, 0.5, 100, epoch).unwrap();
            assert!((lr - expect).abs() < 1e-18, "epoch {epoch}: {lr}");
        }
    }

    #[test]
    fn step_lr_rejects_zero_period() {
        assert!(step_lr(1e-3, 0.5, 0, 1).is_err());
    }
}

use super::ParamStore;
use crate::error::{CoreError, Result};

/// Adam hyper-parameters. `weight_decay` is the Frobenius-penalty
/// coefficient, applied as the coupled gradient term `λ·W`.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// One bias-corrected Adam update over every trainable parameter, then
/// zeroes the gradients. Non-finite gradients abort before any value moves.
pub fn adam_step(store: &mut ParamStore, cfg: &AdamConfig) -> Result<()> {
    for id in store.ids().collect::<Vec<_>>() {
        let t = store.get(id);
        if t.trainable && !t.grad.all_finite() {
            return Err(CoreError::NonFinite {
                what: "gradient",
                context: format!("adam_step parameter {}", store.name(id)),
            });
        }
    }
    for id in store.ids().collect::<Vec<_>>() {
        let t = store.get_mut(id);
        if !t.trainable {
            continue;
        }
        t.step_count += 1;
        let bc1 = 1.0 - cfg.beta1.powi(t.step_count as i32);
        let bc2 = 1.0 - cfg.beta2.powi(t.step_count as i32);
        let n = t.value.data().len();
        for i in 0..n {
            let g = t.grad.data()[i] + cfg.weight_decay * t.value.data()[i];
            let m = cfg.beta1 * t.adam_m.data()[i] + (1.0 - cfg.beta1) * g;
            let v = cfg.beta2 * t.adam_v.data()[i] + (1.0 - cfg.beta2) * g * g;
            t.adam_m.data_mut()[i] = m;
            t.adam_v.data_mut()[i] = v;
            let m_hat = m / bc1;
            let v_hat = v / bc2;
            t.value.data_mut()[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
        t.grad.fill(0.0);
    }
    Ok(())
}

use super::Scalar;
use crate::error::{Error, Result};

/// Adam moment-decay rates and denominator epsilon.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
///
/// ```text
/// m <- b1 m + (1 - b1) g
/// v <- b2 v + (1 - b2) g^2
/// p <- p - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// ```
///
/// `step` is the 1-based index of this update.
pub fn adam_step<T: Scalar>(
    params: &mut [T],
    grads: &[T],
    m: &mut [T],
    v: &mut [T],
    step: u64,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    if step == 0 {
        return Err(Error::config("adam step index starts at 1"));
    }
    let n = params.len();
    if grads.len() != n || m.len() != n || v.len() != n {
        return Err(Error::shape(format!(
            "adam: {n} params, {} grads, {} first moments, {} second moments",
            grads.len(),
            m.len(),
            v.len()
        )));
    }
    let t = step.min(i32::MAX as u64) as i32;
    let b1 = T::from_f64(cfg.beta1);
    let b2 = T::from_f64(cfg.beta2);
    let one_minus_b1 = T::from_f64(1.0 - cfg.beta1);
    let one_minus_b2 = T::from_f64(1.0 - cfg.beta2);
    let c1 = T::from_f64(1.0 - cfg.beta1.powi(t));
    let c2 = T::from_f64(1.0 - cfg.beta2.powi(t));
    let eps = T::from_f64(cfg.epsilon);
    let lr = T::from_f64(lr);
    for i in 0..n {
        let g = grads[i];
        m[i] = b1 * m[i] + one_minus_b1 * g;
        v[i] = b2 * v[i] + one_minus_b2 * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        params[i] = params[i] - lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

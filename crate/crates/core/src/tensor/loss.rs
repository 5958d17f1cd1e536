use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Predictions are clamped to `[BCE_EPSILON, 1 - BCE_EPSILON]` before the logs.
pub const BCE_EPSILON: f64 = 1e-7;

/// Mean binary cross-entropy and its gradient with respect to `pred`.
///
/// `loss = mean(-(t ln p + (1 - t) ln(1 - p)))`,
/// `d_pred = (p - t) / (p (1 - p)) / N`. The sum is accumulated in `f64`.
pub fn bce_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape(format!(
            "bce: prediction {} vs target {}",
            pred.shape(),
            target.shape()
        )));
    }
    let count = pred.shape().len();
    if count == 0 {
        return Err(Error::shape("bce of an empty tensor"));
    }
    let inv_n = 1.0 / count as f64;
    let mut total = 0.0f64;
    let mut grad = Vec::with_capacity(count);
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let p = p.to_f64().clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
        let t = t.to_f64();
        total -= t * p.ln() + (1.0 - t) * (-p).ln_1p();
        grad.push(T::from_f64((p - t) / (p * (1.0 - p)) * inv_n));
    }
    Ok((total * inv_n, Tensor::from_vec(pred.shape(), grad)?))
}

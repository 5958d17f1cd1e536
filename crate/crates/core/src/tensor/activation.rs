use super::{Scalar, Tensor};
use crate::error::{Error, Result};

fn same_shape<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "{what}: tensor {} vs gradient {}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn elu_scalar<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        x
    } else {
        x.exp_m1()
    }
}

/// Exponential linear unit with alpha = 1.
pub fn elu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(elu_scalar)
}

/// Gradient of [`elu`] given its *input*: 1 for x >= 0, e^x (= elu(x) + 1) below.
pub fn elu_backward<T: Scalar>(input: &Tensor<T>, d_output: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape(input, d_output, "elu backward")?;
    let mut d = d_output.clone();
    for (g, &x) in d.data_mut().iter_mut().zip(input.data()) {
        if x < T::zero() {
            *g = *g * x.exp();
        }
    }
    Ok(d)
}

fn sigmoid_scalar<T: Scalar>(x: T) -> T {
    let s = if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    };
    // Saturation would otherwise round to exactly 0 or 1.
    let hi = T::one() - T::epsilon() / (T::one() + T::one());
    s.max(T::min_positive_value()).min(hi)
}

/// Logistic function, evaluated on the branch that never overflows and kept
/// strictly inside (0, 1).
pub fn sigmoid<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(sigmoid_scalar)
}

/// Gradient of [`sigmoid`] given its *output* `s`: `s (1 - s)`.
pub fn sigmoid_backward<T: Scalar>(output: &Tensor<T>, d_output: &Tensor<T>) -> Result<Tensor<T>> {
    same_shape(output, d_output, "sigmoid backward")?;
    let mut d = d_output.clone();
    for (g, &s) in d.data_mut().iter_mut().zip(output.data()) {
        *g = *g * s * (T::one() - s);
    }
    Ok(d)
}

use super::{Scalar, Shape, Tensor};
use crate::error::{Error, Result};

/// Channel concatenation, `a`'s channels first.
pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (sa, sb) = (a.shape(), b.shape());
    if (sa.n, sa.h, sa.w) != (sb.n, sb.h, sb.w) {
        return Err(Error::shape(format!(
            "cannot concatenate {sa} and {sb}: batch/spatial sizes differ"
        )));
    }
    let out_shape = Shape::new(sa.n, sa.h, sa.w, sa.c + sb.c);
    let mut out = Vec::with_capacity(out_shape.len());
    let (da, db) = (a.data(), b.data());
    for p in 0..sa.pixels() {
        out.extend_from_slice(&da[p * sa.c..(p + 1) * sa.c]);
        out.extend_from_slice(&db[p * sb.c..(p + 1) * sb.c]);
    }
    Tensor::from_vec(out_shape, out)
}

/// Inverse of [`concat_channels`]: the first `first` channels, then the rest.
/// Also the backward pass of concatenation.
pub fn split_channels<T: Scalar>(t: &Tensor<T>, first: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let s = t.shape();
    if first > s.c {
        return Err(Error::shape(format!(
            "cannot split {first} channels off {s}"
        )));
    }
    let rest = s.c - first;
    let mut a = Vec::with_capacity(s.pixels() * first);
    let mut b = Vec::with_capacity(s.pixels() * rest);
    for px in t.data().chunks_exact(s.c.max(1)).take(s.pixels()) {
        a.extend_from_slice(&px[..first]);
        b.extend_from_slice(&px[first..]);
    }
    Ok((
        Tensor::from_vec(Shape::new(s.n, s.h, s.w, first), a)?,
        Tensor::from_vec(Shape::new(s.n, s.h, s.w, rest), b)?,
    ))
}

//! 2x2 max-pooling and nearest-neighbour 2x upsampling.

use super::{Scalar, Shape, Tensor};
use crate::error::{Error, Result};

/// Winning positions of a [`maxpool2x2_forward`] call.
///
/// `winners[i]` is the flat input index that produced output element `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolIndices {
    input_shape: Shape,
    winners: Vec<usize>,
}

impl PoolIndices {
    pub fn input_shape(&self) -> Shape {
        self.input_shape
    }

    pub fn output_shape(&self) -> Shape {
        let s = self.input_shape;
        Shape::new(s.n, s.h / 2, s.w / 2, s.c)
    }

    pub fn winners(&self) -> &[usize] {
        &self.winners
    }
}

/// Max over disjoint 2x2 windows. Ties go to the first position in row-major
/// window order (top-left, top-right, bottom-left, bottom-right).
pub fn maxpool2x2_forward<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, PoolIndices)> {
    let s = input.shape();
    if !s.h.is_multiple_of(2) || !s.w.is_multiple_of(2) {
        return Err(Error::shape(format!(
            "max-pool 2x2 needs even height and width, got {s}"
        )));
    }
    let out_shape = Shape::new(s.n, s.h / 2, s.w / 2, s.c);
    let data = input.data();
    let mut out = Vec::with_capacity(out_shape.len());
    let mut winners = Vec::with_capacity(out_shape.len());
    for n in 0..s.n {
        for oy in 0..out_shape.h {
            for ox in 0..out_shape.w {
                let base = |dy: usize, dx: usize| ((n * s.h + 2 * oy + dy) * s.w + 2 * ox + dx) * s.c;
                let taps = [base(0, 0), base(0, 1), base(1, 0), base(1, 1)];
                for c in 0..s.c {
                    let mut best = taps[0] + c;
                    for &t in &taps[1..] {
                        if data[t + c] > data[best] {
                            best = t + c;
                        }
                    }
                    out.push(data[best]);
                    winners.push(best);
                }
            }
        }
    }
    Ok((
        Tensor::from_vec(out_shape, out)?,
        PoolIndices {
            input_shape: s,
            winners,
        },
    ))
}

/// Routes each upstream gradient to the recorded winner; every other input
/// position receives zero.
pub fn maxpool2x2_backward<T: Scalar>(
    indices: &PoolIndices,
    d_output: &Tensor<T>,
) -> Result<Tensor<T>> {
    if d_output.shape() != indices.output_shape() {
        return Err(Error::shape(format!(
            "max-pool upstream gradient is {} but the forward output was {}",
            d_output.shape(),
            indices.output_shape()
        )));
    }
    let mut d_input = Tensor::zeros(indices.input_shape);
    let dx = d_input.data_mut();
    for (&w, &g) in indices.winners.iter().zip(d_output.data()) {
        dx[w] = g;
    }
    Ok(d_input)
}

/// Copies every pixel into a 2x2 block: `(n, h, w, c) -> (n, 2h, 2w, c)`.
pub fn upsample2x_forward<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    let s = input.shape();
    let out_shape = Shape::new(s.n, 2 * s.h, 2 * s.w, s.c);
    let mut out = Vec::with_capacity(out_shape.len());
    let data = input.data();
    for n in 0..s.n {
        for y in 0..out_shape.h {
            let row = ((n * s.h + y / 2) * s.w) * s.c;
            for x in 0..out_shape.w {
                let p = row + (x / 2) * s.c;
                out.extend_from_slice(&data[p..p + s.c]);
            }
        }
    }
    Tensor::from_vec(out_shape, out).expect("upsample shape")
}

/// Adjoint of [`upsample2x_forward`]: sums each 2x2 block of the gradient.
pub fn upsample2x_backward<T: Scalar>(d_output: &Tensor<T>) -> Result<Tensor<T>> {
    let s = d_output.shape();
    if !s.h.is_multiple_of(2) || !s.w.is_multiple_of(2) {
        return Err(Error::shape(format!(
            "upsample gradient {s} must have even height and width"
        )));
    }
    let in_shape = Shape::new(s.n, s.h / 2, s.w / 2, s.c);
    let mut d_input = Tensor::zeros(in_shape);
    let dy = d_output.data();
    let dx = d_input.data_mut();
    for n in 0..s.n {
        for y in 0..in_shape.h {
            for x in 0..in_shape.w {
                let dst = ((n * in_shape.h + y) * in_shape.w + x) * s.c;
                for (dy_off, dx_off) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let src = ((n * s.h + 2 * y + dy_off) * s.w + 2 * x + dx_off) * s.c;
                    for c in 0..s.c {
                        dx[dst + c] = dx[dst + c] + dy[src + c];
                    }
                }
            }
        }
    }
    Ok(d_input)
}

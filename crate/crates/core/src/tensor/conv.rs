//! Stride-1 "same" convolution through im2col + GEMM.
//!
//! Output positions are processed in fixed-size row chunks so the column
//! buffer stays bounded at 512x512 inputs. The chunk size is a constant, so
//! the floating point reduction order (and therefore every result bit) does
//! not depend on the input.

use super::{ConvKernel, Scalar, Shape, Tensor};
use crate::error::{Error, Result};

const CHUNK_ROWS: usize = 2048;

/// Zero padding `(before, after)` that keeps a stride-1 output the same size.
///
/// Odd kernels pad symmetrically; even kernels put the extra row/column after.
pub fn same_padding(k: usize) -> (usize, usize) {
    let before = (k - 1) / 2;
    (before, k - 1 - before)
}

/// Gradients of [`conv2d_forward`].
#[derive(Debug, Clone)]
pub struct ConvGrads<T: Scalar> {
    pub d_input: Tensor<T>,
    /// Same shape as the kernel; `bias` holds the bias gradient.
    pub d_kernel: ConvKernel<T>,
}

fn check_shapes<T: Scalar>(input: Shape, kernel: &ConvKernel<T>) -> Result<()> {
    if input.c != kernel.c_in {
        return Err(Error::shape(format!(
            "conv2d input {} has {} channels but kernel {}x{}x{}x{} expects {}",
            input, input.c, kernel.kh, kernel.kw, kernel.c_in, kernel.c_out, kernel.c_in
        )));
    }
    if kernel.kh == 0 || kernel.kw == 0 {
        return Err(Error::shape("conv2d kernel has a zero spatial size"));
    }
    Ok(())
}

/// Fills `col` with `rows` im2col rows starting at flat output position `start`.
fn im2col<T: Scalar>(
    input: &Tensor<T>,
    kh: usize,
    kw: usize,
    start: usize,
    rows: usize,
    col: &mut [T],
) {
    let s = input.shape();
    let (pt, _) = same_padding(kh);
    let (pl, _) = same_padding(kw);
    let cin = s.c;
    let kcols = kh * kw * cin;
    let data = input.data();
    for r in 0..rows {
        let p = start + r;
        let x = p % s.w;
        let y = (p / s.w) % s.h;
        let n = p / (s.w * s.h);
        let row = &mut col[r * kcols..(r + 1) * kcols];
        for ky in 0..kh {
            let iy = y as isize + ky as isize - pt as isize;
            for kx in 0..kw {
                let ix = x as isize + kx as isize - pl as isize;
                let dst = &mut row[(ky * kw + kx) * cin..(ky * kw + kx + 1) * cin];
                if iy < 0 || ix < 0 || iy >= s.h as isize || ix >= s.w as isize {
                    dst.fill(T::zero());
                } else {
                    let src = ((n * s.h + iy as usize) * s.w + ix as usize) * cin;
                    dst.copy_from_slice(&data[src..src + cin]);
                }
            }
        }
    }
}

/// Scatter-adds column gradients back onto the input gradient.
fn col2im<T: Scalar>(
    d_col: &[T],
    shape: Shape,
    kh: usize,
    kw: usize,
    start: usize,
    rows: usize,
    d_input: &mut [T],
) {
    let (pt, _) = same_padding(kh);
    let (pl, _) = same_padding(kw);
    let cin = shape.c;
    let kcols = kh * kw * cin;
    for r in 0..rows {
        let p = start + r;
        let x = p % shape.w;
        let y = (p / shape.w) % shape.h;
        let n = p / (shape.w * shape.h);
        let row = &d_col[r * kcols..(r + 1) * kcols];
        for ky in 0..kh {
            let iy = y as isize + ky as isize - pt as isize;
            if iy < 0 || iy >= shape.h as isize {
                continue;
            }
            for kx in 0..kw {
                let ix = x as isize + kx as isize - pl as isize;
                if ix < 0 || ix >= shape.w as isize {
                    continue;
                }
                let dst = ((n * shape.h + iy as usize) * shape.w + ix as usize) * cin;
                let src = &row[(ky * kw + kx) * cin..(ky * kw + kx + 1) * cin];
                for (d, &g) in d_input[dst..dst + cin].iter_mut().zip(src) {
                    *d = *d + g;
                }
            }
        }
    }
}

fn is_pointwise<T>(kernel: &ConvKernel<T>) -> bool {
    kernel.kh == 1 && kernel.kw == 1
}

/// `out[n,y,x,o] = bias[o] + sum over the zero-padded kh x kw window of input * weights`.
pub fn conv2d_forward<T: Scalar>(input: &Tensor<T>, kernel: &ConvKernel<T>) -> Result<Tensor<T>> {
    let s = input.shape();
    check_shapes(s, kernel)?;
    let cout = kernel.c_out;
    let kcols = kernel.kh * kernel.kw * s.c;
    let total = s.pixels();
    let mut out = Vec::with_capacity(total * cout);
    for _ in 0..total {
        out.extend_from_slice(&kernel.bias);
    }
    let mut col = Vec::new();
    let mut start = 0;
    while start < total {
        let rows = CHUNK_ROWS.min(total - start);
        let lhs: &[T] = if is_pointwise(kernel) {
            &input.data()[start * kcols..(start + rows) * kcols]
        } else {
            col.resize(rows * kcols, T::zero());
            im2col(input, kernel.kh, kernel.kw, start, rows, &mut col);
            &col
        };
        T::gemm(
            rows,
            kcols,
            cout,
            (lhs, kcols as isize, 1),
            (&kernel.weights, cout as isize, 1),
            T::one(),
            (&mut out[start * cout..(start + rows) * cout], cout as isize, 1),
        );
        start += rows;
    }
    Tensor::from_vec(Shape::new(s.n, s.h, s.w, cout), out)
}

/// Exact gradients of [`conv2d_forward`] for upstream gradient `d_output`.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    kernel: &ConvKernel<T>,
    d_output: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let s = input.shape();
    check_shapes(s, kernel)?;
    let expected = Shape::new(s.n, s.h, s.w, kernel.c_out);
    if d_output.shape() != expected {
        return Err(Error::shape(format!(
            "conv2d upstream gradient is {} but the forward output is {}",
            d_output.shape(),
            expected
        )));
    }
    let cout = kernel.c_out;
    let kcols = kernel.kh * kernel.kw * s.c;
    let total = s.pixels();
    let dy = d_output.data();

    let mut d_kernel = kernel.zeros_like();
    for row in dy.chunks_exact(cout) {
        for (b, &g) in d_kernel.bias.iter_mut().zip(row) {
            *b = *b + g;
        }
    }

    let mut d_input = vec![T::zero(); s.len()];
    let mut col = Vec::new();
    let mut d_col = Vec::new();
    let mut start = 0;
    while start < total {
        let rows = CHUNK_ROWS.min(total - start);
        let dy_chunk = &dy[start * cout..(start + rows) * cout];
        let lhs: &[T] = if is_pointwise(kernel) {
            &input.data()[start * kcols..(start + rows) * kcols]
        } else {
            col.resize(rows * kcols, T::zero());
            im2col(input, kernel.kh, kernel.kw, start, rows, &mut col);
            &col
        };
        // d_W (kcols x cout) += col^T (kcols x rows) * dy (rows x cout)
        T::gemm(
            kcols,
            rows,
            cout,
            (lhs, 1, kcols as isize),
            (dy_chunk, cout as isize, 1),
            T::one(),
            (&mut d_kernel.weights, cout as isize, 1),
        );
        // d_col (rows x kcols) = dy (rows x cout) * W^T (cout x kcols)
        if is_pointwise(kernel) {
            T::gemm(
                rows,
                cout,
                kcols,
                (dy_chunk, cout as isize, 1),
                (&kernel.weights, 1, cout as isize),
                T::zero(),
                (
                    &mut d_input[start * kcols..(start + rows) * kcols],
                    kcols as isize,
                    1,
                ),
            );
        } else {
            d_col.clear();
            d_col.resize(rows * kcols, T::zero());
            T::gemm(
                rows,
                cout,
                kcols,
                (dy_chunk, cout as isize, 1),
                (&kernel.weights, 1, cout as isize),
                T::zero(),
                (&mut d_col, kcols as isize, 1),
            );
            col2im(&d_col, s, kernel.kh, kernel.kw, start, rows, &mut d_input);
        }
        start += rows;
    }

    Ok(ConvGrads {
        d_input: Tensor::from_vec(s, d_input)?,
        d_kernel,
    })
}

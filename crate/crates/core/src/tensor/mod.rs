//! NHWC tensors and the forward/backward layer set of the U-Net.
//!
//! Everything here is generic over [`Scalar`] so the same code runs in `f32`
//! for training and in `f64` for finite-difference gradient checks.

mod activation;
mod adam;
mod concat;
mod conv;
pub mod gradcheck;
mod init;
mod loss;
mod pool;

use std::fmt;

use num_traits::Float;

use crate::error::{Error, Result};

pub use activation::{elu, elu_backward, sigmoid, sigmoid_backward};
pub use adam::{adam_step, AdamConfig};
pub use concat::{concat_channels, split_channels};
pub use conv::{conv2d_backward, conv2d_forward, same_padding, ConvGrads};
pub use init::{he_normal_init, he_std};
pub use loss::{bce_loss, BCE_EPSILON};
pub use pool::{
    maxpool2x2_backward, maxpool2x2_forward, upsample2x_backward, upsample2x_forward, PoolIndices,
};

/// Floating point element type of tensors.
pub trait Scalar: Float + Default + fmt::Debug + Send + Sync + 'static {
    /// `c = a * b + beta * c` over strided row/column-major views.
    ///
    /// `a` is `m x k`, `b` is `k x n`, `c` is `m x n`; strides are in elements.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: (&[Self], isize, isize),
        b: (&[Self], isize, isize),
        beta: Self,
        c: (&mut [Self], isize, isize),
    );

    fn from_f64(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("f64 converts to every scalar")
    }

    fn to_f64(self) -> f64 {
        <f64 as num_traits::NumCast>::from(self).expect("scalar converts to f64")
    }
}

fn span(rows: usize, cols: usize, rs: isize, cs: isize) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs as usize + (cols - 1) * cs as usize + 1
    }
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: (&[Self], isize, isize),
                b: (&[Self], isize, isize),
                beta: Self,
                c: (&mut [Self], isize, isize),
            ) {
                assert!(a.1 >= 0 && a.2 >= 0 && b.1 >= 0 && b.2 >= 0 && c.1 >= 0 && c.2 >= 0);
                assert!(a.0.len() >= span(m, k, a.1, a.2), "gemm: lhs too short");
                assert!(b.0.len() >= span(k, n, b.1, b.2), "gemm: rhs too short");
                assert!(c.0.len() >= span(m, n, c.1, c.2), "gemm: output too short");
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: every index the kernel touches lies inside the spans
                // asserted above, and `c` is uniquely borrowed.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        1.0,
                        a.0.as_ptr(),
                        a.1,
                        a.2,
                        b.0.as_ptr(),
                        b.1,
                        b.2,
                        beta,
                        c.0.as_mut_ptr(),
                        c.1,
                        c.2,
                    );
                }
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);

/// Shape of a rank-4 `(batch, height, width, channels)` tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl Shape {
    pub const fn new(n: usize, h: usize, w: usize, c: usize) -> Self {
        Shape { n, h, w, c }
    }

    pub const fn len(&self) -> usize {
        self.n * self.h * self.w * self.c
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub const fn pixels(&self) -> usize {
        self.n * self.h * self.w
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}x{}", self.n, self.h, self.w, self.c)
    }
}

/// Dense row-major `(n, h, w, c)` tensor.
#[derive(Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: Shape) -> Self {
        Tensor {
            shape,
            data: vec![T::zero(); shape.len()],
        }
    }

    pub fn filled(shape: Shape, value: T) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::shape(format!(
                "tensor {shape} needs {} values, got {}",
                shape.len(),
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize) -> T) -> Self {
        Tensor {
            shape,
            data: (0..shape.len()).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn index(&self, n: usize, y: usize, x: usize, c: usize) -> usize {
        let s = self.shape;
        debug_assert!(n < s.n && y < s.h && x < s.w && c < s.c);
        ((n * s.h + y) * s.w + x) * s.c + c
    }

    pub fn at(&self, n: usize, y: usize, x: usize, c: usize) -> T {
        self.data[self.index(n, y, x, c)]
    }

    pub fn set(&mut self, n: usize, y: usize, x: usize, c: usize, v: T) {
        let i = self.index(n, y, x, c);
        self.data[i] = v;
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&x| Scalar::to_f64(x)).sum()
    }

    /// Element-type conversion.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&x| U::from_f64(Scalar::to_f64(x))).collect(),
        }
    }

    /// Stacks equally shaped tensors along the batch axis.
    pub fn stack(items: &[&Tensor<T>]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::shape("cannot stack zero tensors"))?
            .shape;
        let mut data = Vec::with_capacity(first.len() * items.len());
        let mut n = 0;
        for t in items {
            if (t.shape.h, t.shape.w, t.shape.c) != (first.h, first.w, first.c) {
                return Err(Error::shape(format!(
                    "cannot stack {} with {}",
                    t.shape, first
                )));
            }
            n += t.shape.n;
            data.extend_from_slice(&t.data);
        }
        Ok(Tensor {
            shape: Shape::new(n, first.h, first.w, first.c),
            data,
        })
    }

    /// The `i`-th batch entry as a batch-1 tensor.
    pub fn batch_item(&self, i: usize) -> Tensor<T> {
        let s = self.shape;
        let per = s.h * s.w * s.c;
        Tensor {
            shape: Shape::new(1, s.h, s.w, s.c),
            data: self.data[i * per..(i + 1) * per].to_vec(),
        }
    }
}

impl<T: Scalar> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor({}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, ", {:?}", self.data)?;
        }
        write!(f, ")")
    }
}

/// Convolution kernel laid out `(kh, kw, c_in, c_out)` row-major, plus bias.
///
/// Also used as the container for kernel gradients and Adam moments.
#[derive(Clone, PartialEq)]
pub struct ConvKernel<T = f32> {
    pub kh: usize,
    pub kw: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvKernel<T> {
    pub fn zeros(kh: usize, kw: usize, c_in: usize, c_out: usize) -> Self {
        ConvKernel {
            kh,
            kw,
            c_in,
            c_out,
            weights: vec![T::zero(); kh * kw * c_in * c_out],
            bias: vec![T::zero(); c_out],
        }
    }

    pub fn from_parts(
        (kh, kw, c_in, c_out): (usize, usize, usize, usize),
        weights: Vec<T>,
        bias: Vec<T>,
    ) -> Result<Self> {
        if weights.len() != kh * kw * c_in * c_out || bias.len() != c_out {
            return Err(Error::shape(format!(
                "kernel {kh}x{kw}x{c_in}x{c_out} got {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        Ok(ConvKernel {
            kh,
            kw,
            c_in,
            c_out,
            weights,
            bias,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.kh, self.kw, self.c_in, self.c_out)
    }

    pub fn weight_index(&self, ky: usize, kx: usize, ci: usize, co: usize) -> usize {
        ((ky * self.kw + kx) * self.c_in + ci) * self.c_out + co
    }

    /// Learned values: weights followed by biases.
    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.kh, self.kw, self.c_in, self.c_out)
    }

    pub fn cast<U: Scalar>(&self) -> ConvKernel<U> {
        ConvKernel {
            kh: self.kh,
            kw: self.kw,
            c_in: self.c_in,
            c_out: self.c_out,
            weights: self.weights.iter().map(|&x| U::from_f64(Scalar::to_f64(x))).collect(),
            bias: self.bias.iter().map(|&x| U::from_f64(Scalar::to_f64(x))).collect(),
        }
    }
}

impl<T: Scalar> fmt::Debug for ConvKernel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ConvKernel({}x{}x{}x{})",
            self.kh, self.kw, self.c_in, self.c_out
        )
    }
}

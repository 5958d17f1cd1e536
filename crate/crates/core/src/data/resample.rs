//! Separable cubic-convolution resampling and the degradation operator.

use super::image::{quantize, ImageRGB8};
use crate::error::{Error, Result};

/// Catmull-Rom parameter of the cubic convolution kernel.
pub const CUBIC_A: f64 = -0.5;

/// Cubic convolution kernel with parameter [`CUBIC_A`].
pub fn cubic_kernel(x: f64) -> f64 {
    let a = CUBIC_A;
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

/// Weights of the four taps `floor(s) - 1 ..= floor(s) + 2` for fractional
/// offset `t = s - floor(s)`.
pub fn cubic_weights(t: f64) -> [f64; 4] {
    [
        cubic_kernel(1.0 + t),
        cubic_kernel(t),
        cubic_kernel(1.0 - t),
        cubic_kernel(2.0 - t),
    ]
}

/// Interpolates a 1-D signal at real position `s` with edge clamping.
pub fn sample_1d(signal: &[f64], s: f64) -> f64 {
    let base = s.floor();
    let w = cubic_weights(s - base);
    let last = signal.len() as isize - 1;
    (0..4)
        .map(|k| {
            let i = (base as isize - 1 + k as isize).clamp(0, last) as usize;
            w[k] * signal[i]
        })
        .sum()
}

/// Source taps and weights for every destination index along one axis.
fn axis_plan(src_len: usize, dst_len: usize) -> Vec<([usize; 4], [f64; 4])> {
    let scale = src_len as f64 / dst_len as f64;
    let last = src_len as isize - 1;
    (0..dst_len)
        .map(|d| {
            let s = (d as f64 + 0.5) * scale - 0.5;
            let base = s.floor();
            let w = cubic_weights(s - base);
            let idx = std::array::from_fn(|k| (base as isize - 1 + k as isize).clamp(0, last) as usize);
            (idx, w)
        })
        .collect()
}

/// Resizes with separable Catmull-Rom cubic convolution.
///
/// Pixel centres are aligned (`src = (dst + 0.5) * in / out - 0.5`), samples
/// outside the image repeat the edge, both passes run in `f64`, and the result
/// is rounded half away from zero and clamped to [0, 255].
pub fn bicubic_resample(image: &ImageRGB8, out_w: usize, out_h: usize) -> Result<ImageRGB8> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::config(format!(
            "resample target {out_w}x{out_h} has a zero dimension"
        )));
    }
    let (in_w, in_h) = image.dims();
    if in_w == 0 || in_h == 0 {
        return Err(Error::config("cannot resample an empty image"));
    }
    let src = image.pixels();
    let cols = axis_plan(in_w, out_w);
    let rows = axis_plan(in_h, out_h);

    // Horizontal pass: in_h x out_w x 3, unrounded.
    let mut mid = vec![0.0f64; in_h * out_w * 3];
    for y in 0..in_h {
        let row = &src[y * in_w * 3..(y + 1) * in_w * 3];
        for (x, (idx, w)) in cols.iter().enumerate() {
            for c in 0..3 {
                let v: f64 = (0..4).map(|k| w[k] * row[idx[k] * 3 + c] as f64).sum();
                mid[(y * out_w + x) * 3 + c] = v;
            }
        }
    }

    let mut out = Vec::with_capacity(out_w * out_h * 3);
    for (idx, w) in &rows {
        for x in 0..out_w {
            for c in 0..3 {
                let v: f64 = (0..4).map(|k| w[k] * mid[(idx[k] * out_w + x) * 3 + c]).sum();
                out.push(quantize(v));
            }
        }
    }
    ImageRGB8::new(out_w, out_h, out)
}

/// Synthetic low-resolution counterpart: cubic downsample by `factor` in each
/// dimension, then cubic upsample back to the original size.
pub fn degrade(image: &ImageRGB8, factor: usize) -> Result<ImageRGB8> {
    if factor < 2 {
        return Err(Error::config(format!("degradation factor must be >= 2, got {factor}")));
    }
    let (w, h) = image.dims();
    if w == 0 || h == 0 || w % factor != 0 || h % factor != 0 {
        return Err(Error::config(format!(
            "image {w}x{h} is not divisible by degradation factor {factor}"
        )));
    }
    let small = bicubic_resample(image, w / factor, h / factor)?;
    bicubic_resample(&small, w, h)
}

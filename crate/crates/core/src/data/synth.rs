//! Procedural histology-like textures.
//!
//! Each image is an H&E-style composite: a pale-to-pink stromal field from
//! low-frequency value noise, scattered elliptical cells with a darker
//! membrane ring and a purple nucleus, small red blood cells, and a
//! band-limited grain layer. Image `i` of a batch draws only from stream `i`
//! of the master seed, so images are independent of batch size.

use super::image::{quantize, ImageRGB8};
use crate::Rng;

const LUMEN: [f64; 3] = [246.0, 236.0, 242.0];
const STROMA: [f64; 3] = [222.0, 156.0, 196.0];
const CYTOPLASM: [f64; 3] = [205.0, 128.0, 178.0];
const MEMBRANE: [f64; 3] = [160.0, 78.0, 138.0];
const NUCLEUS: [f64; 3] = [92.0, 52.0, 132.0];
const ERYTHROCYTE: [f64; 3] = [214.0, 74.0, 96.0];

/// Smoothly interpolated lattice noise in [0, 1] with feature size `cell` pixels.
struct ValueNoise {
    cell: f64,
    cols: usize,
    rows: usize,
    lattice: Vec<f64>,
}

impl ValueNoise {
    fn new(width: usize, height: usize, cell: f64, rng: &mut Rng) -> Self {
        let cols = (width as f64 / cell).ceil() as usize + 2;
        let rows = (height as f64 / cell).ceil() as usize + 2;
        let lattice = (0..cols * rows).map(|_| rng.uniform()).collect();
        ValueNoise {
            cell,
            cols,
            rows,
            lattice,
        }
    }

    /// Tiles periodically outside the lattice; `x` and `y` must be non-negative.
    fn at(&self, x: f64, y: f64) -> f64 {
        let (gx, gy) = (x.max(0.0) / self.cell, y.max(0.0) / self.cell);
        let (ix, iy) = (gx.floor() as usize, gy.floor() as usize);
        let (fx, fy) = (smooth(gx.fract()), smooth(gy.fract()));
        let v = |i: usize, j: usize| self.lattice[(j % self.rows) * self.cols + i % self.cols];
        let top = v(ix, iy) * (1.0 - fx) + v(ix + 1, iy) * fx;
        let bottom = v(ix, iy + 1) * (1.0 - fx) + v(ix + 1, iy + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

fn smoothstep(edge0: f64, edge1: f64, x: f64) -> f64 {
    smooth(((x - edge0) / (edge1 - edge0)).clamp(0.0, 1.0))
}

struct Canvas {
    width: usize,
    height: usize,
    rgb: Vec<f64>,
}

impl Canvas {
    fn blend(&mut self, x: usize, y: usize, color: [f64; 3], alpha: f64) {
        if alpha <= 0.0 {
            return;
        }
        let i = (y * self.width + x) * 3;
        for (v, target) in self.rgb[i..i + 3].iter_mut().zip(color) {
            *v += (target - *v) * alpha;
        }
    }

    /// Visits pixels of the bounding box of a rotated ellipse, passing the
    /// normalized radial distance (1 on the boundary).
    fn ellipse(
        &mut self,
        (cx, cy): (f64, f64),
        (rx, ry): (f64, f64),
        angle: f64,
        mut shade: impl FnMut(&mut Canvas, usize, usize, f64),
    ) {
        let r = rx.max(ry) + 2.0;
        let (sin, cos) = angle.sin_cos();
        let x0 = (cx - r).floor().max(0.0) as usize;
        let y0 = (cy - r).floor().max(0.0) as usize;
        let x1 = ((cx + r).ceil() as usize).min(self.width.saturating_sub(1));
        let y1 = ((cy + r).ceil() as usize).min(self.height.saturating_sub(1));
        if cx + r < 0.0 || cy + r < 0.0 {
            return;
        }
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                let u = dx * cos + dy * sin;
                let v = -dx * sin + dy * cos;
                let d = ((u / rx).powi(2) + (v / ry).powi(2)).sqrt();
                shade(self, x, y, d);
            }
        }
    }
}

/// Renders one image from `rng`.
pub fn synth_image(width: usize, height: usize, rng: &mut Rng) -> ImageRGB8 {
    let tissue = ValueNoise::new(width, height, 48.0, rng);
    let detail = ValueNoise::new(width, height, 12.0, rng);
    let grain = ValueNoise::new(width, height, 2.5, rng);

    let mut canvas = Canvas {
        width,
        height,
        rgb: Vec::with_capacity(width * height * 3),
    };
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64, y as f64);
            let t = smoothstep(0.35, 0.65, 0.75 * tissue.at(fx, fy) + 0.25 * detail.at(fx, fy));
            for c in 0..3 {
                canvas.rgb.push(LUMEN[c] + (STROMA[c] - LUMEN[c]) * t);
            }
        }
    }

    let area = (width * height) as f64;
    let cells = (area / 700.0).round() as usize;
    for _ in 0..cells {
        let center = (rng.uniform_in(0.0, width as f64), rng.uniform_in(0.0, height as f64));
        // Cells sit in stroma; skip most that land in open lumen.
        let density = tissue.at(center.0, center.1);
        if density < 0.4 && rng.uniform() < 0.8 {
            continue;
        }
        let rx = rng.uniform_in(4.0, 10.0);
        let ry = rx * rng.uniform_in(0.55, 1.0);
        let angle = rng.uniform_in(0.0, std::f64::consts::PI);
        let nucleus_scale = rng.uniform_in(0.35, 0.6);
        let nucleus_shift = (rng.uniform_in(-0.2, 0.2) * rx, rng.uniform_in(-0.2, 0.2) * ry);
        let chroma = rng.uniform_in(0.75, 1.0);
        let edge = 0.8 / rx.min(ry);
        canvas.ellipse(center, (rx, ry), angle, |cv, x, y, d| {
            let fill = 1.0 - smoothstep(1.0 - edge, 1.0 + edge, d);
            cv.blend(x, y, CYTOPLASM, 0.55 * fill);
            let ring = (-((d - 1.0) / (1.3 * edge)).powi(2)).exp();
            cv.blend(x, y, MEMBRANE, 0.8 * ring);
        });
        let nc = (center.0 + nucleus_shift.0, center.1 + nucleus_shift.1);
        let (nrx, nry) = (rx * nucleus_scale, ry * nucleus_scale);
        let nedge = 0.8 / nrx.min(nry);
        canvas.ellipse(nc, (nrx, nry), angle, |cv, x, y, d| {
            let fill = 1.0 - smoothstep(1.0 - nedge, 1.0 + nedge, d);
            let speckle = 0.7 + 0.3 * grain.at(x as f64 * 1.7, y as f64 * 1.7);
            cv.blend(x, y, NUCLEUS, chroma * speckle * fill);
        });
    }

    let erythrocytes = (area / 5000.0).round() as usize;
    for _ in 0..erythrocytes {
        let center = (rng.uniform_in(0.0, width as f64), rng.uniform_in(0.0, height as f64));
        let r = rng.uniform_in(2.5, 4.0);
        let edge = 0.8 / r;
        canvas.ellipse(center, (r, r), 0.0, |cv, x, y, d| {
            let disc = 1.0 - smoothstep(1.0 - edge, 1.0 + edge, d);
            // Pale centre of the biconcave disc.
            let pallor = 1.0 - 0.35 * (1.0 - smoothstep(0.0, 0.5, d));
            cv.blend(x, y, ERYTHROCYTE, 0.85 * disc * pallor);
        });
    }

    let mut pixels = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        for x in 0..width {
            let g = 14.0 * (grain.at(x as f64, y as f64) - 0.5);
            let i = (y * width + x) * 3;
            for c in 0..3 {
                pixels.push(quantize(canvas.rgb[i + c] + g));
            }
        }
    }
    ImageRGB8::new(width, height, pixels).expect("canvas matches its dimensions")
}

/// `n` images; image `i` is rendered from stream `i` of `seed`.
pub fn synth_generate(n: usize, width: usize, height: usize, seed: u64) -> Vec<ImageRGB8> {
    let root = Rng::new(seed);
    (0..n)
        .map(|i| synth_image(width, height, &mut root.fork(i as u64)))
        .collect()
}

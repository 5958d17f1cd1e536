//! Relative mean squared error of reconstructions.

use crate::data::{decode_residual, ImageRGB8, PairedSample, NO_CHANGE};
use crate::error::{Error, Result};
use crate::model::{predict_residual, ModelWeights};

/// Anything that maps a low-resolution image to an 8-bit residual image.
pub trait ResidualPredictor {
    fn predict(&self, lr: &ImageRGB8) -> Result<ImageRGB8>;
}

impl ResidualPredictor for ModelWeights {
    fn predict(&self, lr: &ImageRGB8) -> Result<ImageRGB8> {
        predict_residual(self, lr)
    }
}

/// Predicts "no change" (127) everywhere; reconstructs the input unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoChangePredictor;

impl ResidualPredictor for NoChangePredictor {
    fn predict(&self, lr: &ImageRGB8) -> Result<ImageRGB8> {
        Ok(ImageRGB8::filled(lr.width(), lr.height(), [NO_CHANGE; 3]))
    }
}

/// Relative squared errors over one split, all on [0, 1]-scaled bytes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmseReport {
    /// `sum (decode(lr, predicted) - hr)^2 / sum hr^2`.
    pub reconstruction: f64,
    /// `sum (predicted - residual)^2 / sum residual^2`.
    pub residual: f64,
    /// Reconstruction error of doing nothing: `sum (lr - hr)^2 / sum hr^2`.
    pub baseline: f64,
    pub images: usize,
}

#[derive(Default)]
struct Accum {
    err: f64,
    norm: f64,
}

impl Accum {
    fn add(&mut self, pred: &[u8], truth: &[u8]) {
        for (&p, &t) in pred.iter().zip(truth) {
            let (p, t) = (p as f64 / 255.0, t as f64 / 255.0);
            self.err += (p - t) * (p - t);
            self.norm += t * t;
        }
    }

    fn ratio(&self) -> f64 {
        if self.norm == 0.0 {
            if self.err == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            self.err / self.norm
        }
    }
}

/// Predicts every sample, reconstructs by residual decoding, and accumulates
/// the relative squared errors in `f64`.
pub fn evaluate_rmse(
    predictor: &dyn ResidualPredictor,
    samples: &[PairedSample],
) -> Result<RmseReport> {
    if samples.is_empty() {
        return Err(Error::config("cannot evaluate an empty split"));
    }
    let (mut rec, mut res, mut base) = (Accum::default(), Accum::default(), Accum::default());
    for s in samples {
        let predicted = predictor.predict(&s.lr)?;
        let reconstructed = decode_residual(&s.lr, &predicted)?;
        rec.add(reconstructed.pixels(), s.hr.pixels());
        res.add(predicted.pixels(), s.residual.pixels());
        base.add(s.lr.pixels(), s.hr.pixels());
    }
    Ok(RmseReport {
        reconstruction: rec.ratio(),
        residual: res.ratio(),
        baseline: base.ratio(),
        images: samples.len(),
    })
}

//! The residual-predicting U-Net.
//!
//! Encoder levels run two 3x3 conv + ELU layers and a 2x2 max-pool, doubling
//! the width from `base_channels` at each level; the bottleneck runs the conv
//! pair at `base_channels * 2^levels`. Each decoder level upsamples by
//! nearest-neighbour replication, halves the width with a 2x2 conv,
//! concatenates the pre-pooling encoder activation of the same level and
//! runs the conv pair again. A 1x1 conv to three channels and a sigmoid
//! produce the residual image in (0, 1).

mod io;
mod network;

use serde::{Deserialize, Serialize};

use crate::data::{denormalize, normalize, ImageRGB8};
use crate::error::{Error, Result};
use crate::tensor::{he_normal_init, ConvKernel, Scalar};
use crate::Rng;

pub use io::{load_weights, read_weights, save_weights, write_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION};
pub use network::{backward, forward, infer, ForwardCache};

/// Colour channels of network input and output.
pub const IMAGE_CHANNELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpsampleMode {
    /// Nearest-neighbour 2x replication followed by a same-padded 2x2 conv
    /// that halves the channel count.
    NearestConv2x2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipMode {
    /// Channel concatenation of the pre-pooling encoder activation.
    Concat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UNetConfig {
    pub levels: usize,
    pub base_channels: usize,
    pub convs_per_block: usize,
    pub kernel_size: usize,
    pub upsample: UpsampleMode,
    pub skip: SkipMode,
    /// Nominal input size. The network is fully convolutional, so any size
    /// divisible by `2^levels` is accepted at run time.
    pub input_height: usize,
    pub input_width: usize,
}

impl Default for UNetConfig {
    fn default() -> Self {
        UNetConfig {
            levels: 4,
            base_channels: 16,
            convs_per_block: 2,
            kernel_size: 3,
            upsample: UpsampleMode::NearestConv2x2,
            skip: SkipMode::Concat,
            input_height: 512,
            input_width: 512,
        }
    }
}

/// Name and `(kh, kw, c_in, c_out)` of one convolution layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub shape: [usize; 4],
}

impl LayerSpec {
    fn new(name: String, kh: usize, kw: usize, c_in: usize, c_out: usize) -> Self {
        LayerSpec {
            name,
            shape: [kh, kw, c_in, c_out],
        }
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        let [a, b, c, d] = self.shape;
        (a, b, c, d)
    }
}

impl UNetConfig {
    /// Small configuration for tests and demos.
    pub fn toy(levels: usize, base_channels: usize, size: usize) -> Self {
        UNetConfig {
            levels,
            base_channels,
            input_height: size,
            input_width: size,
            ..Default::default()
        }
    }

    /// Channel width of encoder level `k` (and of its mirrored decoder level).
    pub fn level_channels(&self, k: usize) -> usize {
        self.base_channels << k
    }

    pub fn bottleneck_channels(&self) -> usize {
        self.level_channels(self.levels)
    }

    /// Spatial sizes must be multiples of this.
    pub fn size_divisor(&self) -> usize {
        1 << self.levels
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels > 12 {
            return Err(Error::config(format!("{} levels is unreasonably deep", self.levels)));
        }
        if self.base_channels == 0 {
            return Err(Error::config("base_channels must be at least 1"));
        }
        if self.convs_per_block == 0 {
            return Err(Error::config("convs_per_block must be at least 1"));
        }
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return Err(Error::config(format!(
                "kernel_size must be odd, got {}",
                self.kernel_size
            )));
        }
        self.check_input_size(self.input_height, self.input_width)
    }

    pub fn check_input_size(&self, height: usize, width: usize) -> Result<()> {
        let d = self.size_divisor();
        if height == 0 || width == 0 || !height.is_multiple_of(d) || !width.is_multiple_of(d) {
            return Err(Error::config(format!(
                "input {width}x{height} must be non-empty with both sides divisible by 2^{} = {d}",
                self.levels
            )));
        }
        Ok(())
    }

    /// Every convolution in traversal order: encoder blocks top-down,
    /// bottleneck, decoder blocks bottom-up, final layer.
    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        let k = self.kernel_size;
        let cpb = self.convs_per_block;
        let mut specs = Vec::new();
        let mut c_prev = IMAGE_CHANNELS;
        for level in 0..self.levels {
            let c = self.level_channels(level);
            for j in 0..cpb {
                specs.push(LayerSpec::new(format!("enc{level}_conv{}", j + 1), k, k, c_prev, c));
                c_prev = c;
            }
        }
        let c = self.bottleneck_channels();
        for j in 0..cpb {
            specs.push(LayerSpec::new(format!("bottleneck_conv{}", j + 1), k, k, c_prev, c));
            c_prev = c;
        }
        for level in (0..self.levels).rev() {
            let c = self.level_channels(level);
            specs.push(LayerSpec::new(format!("dec{level}_up"), 2, 2, c_prev, c));
            c_prev = 2 * c;
            for j in 0..cpb {
                specs.push(LayerSpec::new(format!("dec{level}_conv{}", j + 1), k, k, c_prev, c));
                c_prev = c;
            }
        }
        specs.push(LayerSpec::new("final".into(), 1, 1, c_prev, IMAGE_CHANNELS));
        specs
    }

    pub fn param_count(&self) -> usize {
        self.layer_specs()
            .iter()
            .map(|s| {
                let (kh, kw, ci, co) = s.dims();
                kh * kw * ci * co + co
            })
            .sum()
    }

    pub(crate) fn encoder_layer(&self, level: usize, j: usize) -> usize {
        level * self.convs_per_block + j
    }

    pub(crate) fn bottleneck_layer(&self, j: usize) -> usize {
        self.levels * self.convs_per_block + j
    }

    /// Index of `dec{level}_up`; the block's convs follow it.
    pub(crate) fn decoder_up_layer(&self, level: usize) -> usize {
        (self.levels + 1) * self.convs_per_block
            + (self.levels - 1 - level) * (self.convs_per_block + 1)
    }

    pub(crate) fn final_layer(&self) -> usize {
        (self.levels + 1) * self.convs_per_block + self.levels * (self.convs_per_block + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T: Scalar = f32> {
    pub name: String,
    pub kernel: ConvKernel<T>,
}

/// Learned kernels of a U-Net, in [`UNetConfig::layer_specs`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights<T: Scalar = f32> {
    config: UNetConfig,
    layers: Vec<Layer<T>>,
}

/// Per-layer gradients, aligned with [`ModelWeights::layers`].
pub type Gradients<T> = Vec<ConvKernel<T>>;

impl<T: Scalar> ModelWeights<T> {
    /// He-normal kernels drawn in traversal order from `Rng::new(seed)`, zero biases.
    pub fn build(config: UNetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::new(seed);
        let layers = config
            .layer_specs()
            .into_iter()
            .map(|spec| {
                Ok(Layer {
                    kernel: he_normal_init(spec.dims(), &mut rng)?,
                    name: spec.name,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelWeights { config, layers })
    }

    /// Assembles weights from kernels, checking every shape against the config.
    pub fn from_layers(config: UNetConfig, kernels: Vec<ConvKernel<T>>) -> Result<Self> {
        config.validate()?;
        let specs = config.layer_specs();
        if specs.len() != kernels.len() {
            return Err(Error::shape(format!(
                "config needs {} layers, got {}",
                specs.len(),
                kernels.len()
            )));
        }
        let layers = specs
            .into_iter()
            .zip(kernels)
            .map(|(spec, kernel)| {
                if kernel.dims() != spec.dims() {
                    return Err(Error::shape(format!(
                        "layer {} should be {:?} but is {:?}",
                        spec.name,
                        spec.shape,
                        kernel.dims()
                    )));
                }
                Ok(Layer {
                    name: spec.name,
                    kernel,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelWeights { config, layers })
    }

    pub fn config(&self) -> &UNetConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn layer(&self, name: &str) -> Option<&Layer<T>> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn layer_mut(&mut self, name: &str) -> Option<&mut Layer<T>> {
        self.layers.iter_mut().find(|l| l.name == name)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.kernel.param_count()).sum()
    }

    /// All parameters flattened layer by layer, weights before biases.
    pub fn flat_params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.kernel.weights);
            out.extend_from_slice(&l.kernel.bias);
        }
        out
    }

    /// Inverse of [`ModelWeights::flat_params`].
    pub fn set_flat_params(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut at = 0;
        for l in &mut self.layers {
            let w = l.kernel.weights.len();
            l.kernel.weights.copy_from_slice(&flat[at..at + w]);
            at += w;
            let b = l.kernel.bias.len();
            l.kernel.bias.copy_from_slice(&flat[at..at + b]);
            at += b;
        }
        Ok(())
    }

    /// Zeroes the final 1x1 layer and sets its bias to `logit`, making the
    /// network output `sigmoid(logit)` everywhere.
    pub fn set_constant_output(&mut self, logit: T) {
        let last = self.layers.last_mut().expect("at least the final layer");
        last.kernel.weights.iter_mut().for_each(|w| *w = T::zero());
        last.kernel.bias.iter_mut().for_each(|b| *b = logit);
    }

    pub fn cast<U: Scalar>(&self) -> ModelWeights<U> {
        ModelWeights {
            config: self.config,
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    name: l.name.clone(),
                    kernel: l.kernel.cast(),
                })
                .collect(),
        }
    }
}

/// Predicts the shifted residual image of a low-resolution input.
///
/// The image is scaled to [0, 1], run through the network as a batch of one,
/// and the sigmoid output is scaled by 255 and rounded half away from zero.
pub fn predict_residual(weights: &ModelWeights, lr_image: &ImageRGB8) -> Result<ImageRGB8> {
    weights
        .config()
        .check_input_size(lr_image.height(), lr_image.width())?;
    let input = normalize(lr_image);
    let out = infer(weights, &input)?;
    denormalize(&out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_channel_plan() {
        let cfg = UNetConfig::default();
        cfg.validate().unwrap();
        let specs = cfg.layer_specs();
        let get = |n: &str| specs.iter().find(|s| s.name == n).unwrap().shape;
        assert_eq!(get("enc0_conv1"), [3, 3, 3, 16]);
        assert_eq!(get("enc0_conv2"), [3, 3, 16, 16]);
        assert_eq!(get("enc1_conv1"), [3, 3, 16, 32]);
        assert_eq!(get("enc2_conv2"), [3, 3, 64, 64]);
        assert_eq!(get("enc3_conv2"), [3, 3, 128, 128]);
        assert_eq!(get("bottleneck_conv1"), [3, 3, 128, 256]);
        assert_eq!(get("bottleneck_conv2"), [3, 3, 256, 256]);
        assert_eq!(get("dec3_up"), [2, 2, 256, 128]);
        assert_eq!(get("dec3_conv1"), [3, 3, 256, 128]);
        assert_eq!(get("dec0_up"), [2, 2, 32, 16]);
        assert_eq!(get("dec0_conv1"), [3, 3, 32, 16]);
        assert_eq!(get("final"), [1, 1, 16, 3]);
        assert_eq!(specs.len(), 4 * 2 + 2 + 4 * 3 + 1);
        assert_eq!(cfg.bottleneck_channels(), 256);
    }

    #[test]
    fn layer_index_helpers_agree_with_names() {
        for (levels, cpb) in [(0, 2), (1, 2), (2, 3), (4, 2)] {
            let cfg = UNetConfig {
                convs_per_block: cpb,
                ..UNetConfig::toy(levels, 2, 16)
            };
            let specs = cfg.layer_specs();
            for l in 0..levels {
                for j in 0..cpb {
                    assert_eq!(specs[cfg.encoder_layer(l, j)].name, format!("enc{l}_conv{}", j + 1));
                }
                assert_eq!(specs[cfg.decoder_up_layer(l)].name, format!("dec{l}_up"));
            }
            for j in 0..cpb {
                assert_eq!(specs[cfg.bottleneck_layer(j)].name, format!("bottleneck_conv{}", j + 1));
            }
            assert_eq!(cfg.final_layer(), specs.len() - 1);
        }
    }

    #[test]
    fn zero_levels_is_two_convs_and_final() {
        let cfg = UNetConfig::toy(0, 4, 5);
        cfg.validate().unwrap();
        let names: Vec<_> = cfg.layer_specs().into_iter().map(|s| s.name).collect();
        assert_eq!(names, ["bottleneck_conv1", "bottleneck_conv2", "final"]);
    }

    #[test]
    fn indivisible_input_is_a_config_error() {
        let cfg = UNetConfig {
            input_height: 500,
            ..UNetConfig::default()
        };
        assert!(matches!(ModelWeights::<f32>::build(cfg, 1), Err(Error::Config(_))));
    }

    #[test]
    fn build_is_deterministic_and_zero_bias() {
        let cfg = UNetConfig::toy(2, 4, 16);
        let a = ModelWeights::<f32>::build(cfg, 9).unwrap();
        let b = ModelWeights::<f32>::build(cfg, 9).unwrap();
        let c = ModelWeights::<f32>::build(cfg, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.layers().iter().all(|l| l.kernel.bias.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn param_count_closed_form() {
        // Hand sum for levels 1, base 2, 3x3 kernels, two convs per block:
        // enc0: 3*3*3*2+2 + 3*3*2*2+2 = 56 + 38
        // bottleneck: 3*3*2*4+4 + 3*3*4*4+4 = 76 + 148
        // dec0: up 2*2*4*2+2 = 34, conv1 3*3*4*2+2 = 74, conv2 38
        // final: 2*3+3 = 9
        let cfg = UNetConfig::toy(1, 2, 8);
        assert_eq!(cfg.param_count(), 56 + 38 + 76 + 148 + 34 + 74 + 38 + 9);
        let w = ModelWeights::<f32>::build(cfg, 0).unwrap();
        assert_eq!(w.param_count(), cfg.param_count());
    }

    #[test]
    fn flat_params_roundtrip() {
        let cfg = UNetConfig::toy(1, 2, 8);
        let mut w = ModelWeights::<f64>::build(cfg, 3).unwrap();
        let mut flat = w.flat_params();
        flat.iter_mut().for_each(|x| *x += 1.0);
        w.set_flat_params(&flat).unwrap();
        assert_eq!(w.flat_params(), flat);
        assert!(w.set_flat_params(&flat[1..]).is_err());
    }

    #[test]
    fn from_layers_checks_shapes() {
        let cfg = UNetConfig::toy(1, 2, 8);
        let w = ModelWeights::<f32>::build(cfg, 3).unwrap();
        let mut kernels: Vec<_> = w.layers().iter().map(|l| l.kernel.clone()).collect();
        assert!(ModelWeights::from_layers(cfg, kernels.clone()).is_ok());
        kernels[2] = ConvKernel::zeros(3, 3, 2, 5);
        let err = ModelWeights::from_layers(cfg, kernels).unwrap_err().to_string();
        assert!(err.contains("bottleneck_conv1"), "{err}");
    }
}

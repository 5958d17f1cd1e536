use super::{Gradients, ModelWeights, UNetConfig, IMAGE_CHANNELS};
use crate::error::{Error, Result};
use crate::tensor::{
    concat_channels, conv2d_backward, conv2d_forward, elu, elu_backward, maxpool2x2_backward,
    maxpool2x2_forward, sigmoid, sigmoid_backward, split_channels, upsample2x_backward,
    upsample2x_forward, PoolIndices, Scalar, Shape, Tensor,
};

/// Intermediates of one [`forward`] call, consumed by [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T: Scalar> {
    config: UNetConfig,
    input_shape: Shape,
    /// Input of every convolution, in layer order.
    conv_inputs: Vec<Tensor<T>>,
    /// Pre-activation of every ELU layer, in layer order.
    pre_activations: Vec<Option<Tensor<T>>>,
    /// One per encoder level, top-down.
    pools: Vec<PoolIndices>,
    output: Tensor<T>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn output(&self) -> &Tensor<T> {
        &self.output
    }

    pub fn input_shape(&self) -> Shape {
        self.input_shape
    }

    pub fn pool_indices(&self) -> &[PoolIndices] {
        &self.pools
    }

    /// True when both passes took the same side of every non-smooth point:
    /// equal max-pool winners and equal signs of every ELU pre-activation.
    pub fn same_branches(&self, other: &ForwardCache<T>) -> bool {
        let side = |z: &Option<Tensor<T>>| -> Vec<bool> {
            z.iter().flat_map(|t| t.data().iter().map(|&v| v > T::zero())).collect()
        };
        self.pools == other.pools
            && self.pre_activations.len() == other.pre_activations.len()
            && self
                .pre_activations
                .iter()
                .zip(&other.pre_activations)
                .all(|(a, b)| side(a) == side(b))
    }
}

fn check_input<T: Scalar>(config: &UNetConfig, input: &Tensor<T>) -> Result<()> {
    let s = input.shape();
    if s.c != IMAGE_CHANNELS {
        return Err(Error::shape(format!(
            "network input {s} must have {IMAGE_CHANNELS} channels"
        )));
    }
    if s.n == 0 {
        return Err(Error::shape("network input has an empty batch"));
    }
    config
        .check_input_size(s.h, s.w)
        .map_err(|e| Error::shape(format!("network input {s}: {e}")))
}

/// Forward traversal shared by [`forward`] and [`infer`]. `record` sees every
/// convolution input and ELU pre-activation so the caller decides what to keep.
struct Pass<'a, T: Scalar, R> {
    weights: &'a ModelWeights<T>,
    record: R,
}

impl<T: Scalar, R: FnMut(usize, &Tensor<T>, Option<&Tensor<T>>)> Pass<'_, T, R> {
    fn conv(&mut self, layer: usize, x: &Tensor<T>) -> Result<Tensor<T>> {
        let l = &self.weights.layers()[layer];
        conv2d_forward(x, &l.kernel).map_err(|e| Error::shape(format!("layer {}: {e}", l.name)))
    }

    fn conv_elu(&mut self, layer: usize, x: Tensor<T>) -> Result<Tensor<T>> {
        let z = self.conv(layer, &x)?;
        let y = elu(&z);
        (self.record)(layer, &x, Some(&z));
        Ok(y)
    }

    fn conv_linear(&mut self, layer: usize, x: Tensor<T>) -> Result<Tensor<T>> {
        let z = self.conv(layer, &x)?;
        (self.record)(layer, &x, None);
        Ok(z)
    }

    fn run(&mut self, input: &Tensor<T>, pools: &mut Vec<PoolIndices>) -> Result<Tensor<T>> {
        let cfg = *self.weights.config();
        let cpb = cfg.convs_per_block;
        let mut x = input.clone();
        let mut skips = Vec::with_capacity(cfg.levels);
        for level in 0..cfg.levels {
            for j in 0..cpb {
                x = self.conv_elu(cfg.encoder_layer(level, j), x)?;
            }
            let (pooled, idx) = maxpool2x2_forward(&x)?;
            skips.push(x);
            pools.push(idx);
            x = pooled;
        }
        for j in 0..cpb {
            x = self.conv_elu(cfg.bottleneck_layer(j), x)?;
        }
        for level in (0..cfg.levels).rev() {
            let up = cfg.decoder_up_layer(level);
            x = self.conv_linear(up, upsample2x_forward(&x))?;
            x = concat_channels(&x, &skips[level])?;
            for j in 0..cpb {
                x = self.conv_elu(up + 1 + j, x)?;
            }
        }
        let logits = self.conv_linear(cfg.final_layer(), x)?;
        Ok(sigmoid(&logits))
    }
}

/// Runs the network and keeps every intermediate needed by [`backward`].
pub fn forward<T: Scalar>(
    weights: &ModelWeights<T>,
    input: &Tensor<T>,
) -> Result<(Tensor<T>, ForwardCache<T>)> {
    let cfg = *weights.config();
    check_input(&cfg, input)?;
    let n_layers = weights.layers().len();
    let mut conv_inputs: Vec<Option<Tensor<T>>> = vec![None; n_layers];
    let mut pre_activations = vec![None; n_layers];
    let mut pools = Vec::with_capacity(cfg.levels);
    let output = {
        let mut pass = Pass {
            weights,
            record: |layer: usize, x: &Tensor<T>, z: Option<&Tensor<T>>| {
                conv_inputs[layer] = Some(x.clone());
                pre_activations[layer] = z.cloned();
            },
        };
        pass.run(input, &mut pools)?
    };
    let conv_inputs = conv_inputs
        .into_iter()
        .map(|t| t.expect("every layer runs once"))
        .collect();
    let cache = ForwardCache {
        config: cfg,
        input_shape: input.shape(),
        conv_inputs,
        pre_activations,
        pools,
        output: output.clone(),
    };
    Ok((output, cache))
}

/// Forward pass without retaining intermediates.
pub fn infer<T: Scalar>(weights: &ModelWeights<T>, input: &Tensor<T>) -> Result<Tensor<T>> {
    check_input(weights.config(), input)?;
    let mut pools = Vec::new();
    Pass {
        weights,
        record: |_: usize, _: &Tensor<T>, _: Option<&Tensor<T>>| {},
    }
    .run(input, &mut pools)
}

fn conv_back<T: Scalar>(
    weights: &ModelWeights<T>,
    cache: &ForwardCache<T>,
    layer: usize,
    d: Tensor<T>,
    grads: &mut [Option<crate::tensor::ConvKernel<T>>],
) -> Result<Tensor<T>> {
    let l = &weights.layers()[layer];
    let d = match &cache.pre_activations[layer] {
        Some(z) => elu_backward(z, &d)?,
        None => d,
    };
    let g = conv2d_backward(&cache.conv_inputs[layer], &l.kernel, &d)
        .map_err(|e| Error::shape(format!("layer {}: {e}", l.name)))?;
    grads[layer] = Some(g.d_kernel);
    Ok(g.d_input)
}

fn check_cache<T: Scalar>(weights: &ModelWeights<T>, cache: &ForwardCache<T>) -> Result<()> {
    let stale = |why: String| Err(Error::shape(format!("stale forward cache: {why}")));
    if cache.config != *weights.config() {
        return stale("it was produced under a different network config".into());
    }
    if cache.conv_inputs.len() != weights.layers().len() {
        return stale(format!(
            "{} cached layers for {} weight layers",
            cache.conv_inputs.len(),
            weights.layers().len()
        ));
    }
    for (layer, x) in weights.layers().iter().zip(&cache.conv_inputs) {
        if x.shape().c != layer.kernel.c_in {
            return stale(format!(
                "layer {} input has {} channels, kernel expects {}",
                layer.name,
                x.shape().c,
                layer.kernel.c_in
            ));
        }
    }
    Ok(())
}

/// Gradients of a scalar objective with respect to every kernel and bias,
/// given the objective's gradient `d_output` with respect to the network output.
pub fn backward<T: Scalar>(
    weights: &ModelWeights<T>,
    cache: &ForwardCache<T>,
    d_output: &Tensor<T>,
) -> Result<Gradients<T>> {
    check_cache(weights, cache)?;
    if d_output.shape() != cache.output.shape() {
        return Err(Error::shape(format!(
            "output gradient {} does not match network output {}",
            d_output.shape(),
            cache.output.shape()
        )));
    }
    let cfg = cache.config;
    let cpb = cfg.convs_per_block;
    let mut grads: Vec<Option<_>> = vec![None; weights.layers().len()];

    let mut d = sigmoid_backward(&cache.output, d_output)?;
    d = conv_back(weights, cache, cfg.final_layer(), d, &mut grads)?;

    let mut d_skips: Vec<Option<Tensor<T>>> = vec![None; cfg.levels];
    for (level, slot) in d_skips.iter_mut().enumerate() {
        let up = cfg.decoder_up_layer(level);
        for j in (0..cpb).rev() {
            d = conv_back(weights, cache, up + 1 + j, d, &mut grads)?;
        }
        let (d_up, d_skip) = split_channels(&d, cfg.level_channels(level))?;
        *slot = Some(d_skip);
        d = conv_back(weights, cache, up, d_up, &mut grads)?;
        d = upsample2x_backward(&d)?;
    }
    for j in (0..cpb).rev() {
        d = conv_back(weights, cache, cfg.bottleneck_layer(j), d, &mut grads)?;
    }
    for level in (0..cfg.levels).rev() {
        d = maxpool2x2_backward(&cache.pools[level], &d)?;
        let skip = d_skips[level].take().expect("filled by the decoder loop");
        for (a, &b) in d.data_mut().iter_mut().zip(skip.data()) {
            *a = *a + b;
        }
        for j in (0..cpb).rev() {
            d = conv_back(weights, cache, cfg.encoder_layer(level, j), d, &mut grads)?;
        }
    }
    Ok(grads
        .into_iter()
        .map(|g| g.expect("every layer receives a gradient"))
        .collect())
}

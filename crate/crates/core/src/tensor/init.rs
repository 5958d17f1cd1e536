use super::{ConvKernel, Scalar};
use crate::error::{Error, Result};
use crate::Rng;

/// Standard deviation `sqrt(2 / fan_in)` of He-normal initialization.
pub fn he_std(fan_in: usize) -> f64 {
    (2.0 / fan_in as f64).sqrt()
}

/// Kernel with weights drawn i.i.d. from `Normal(0, 2 / fan_in)`,
/// `fan_in = kh * kw * c_in`, and zero biases. Weights are drawn in storage
/// order `(kh, kw, c_in, c_out)`.
pub fn he_normal_init<T: Scalar>(
    (kh, kw, c_in, c_out): (usize, usize, usize, usize),
    rng: &mut Rng,
) -> Result<ConvKernel<T>> {
    let fan_in = kh * kw * c_in;
    if fan_in == 0 {
        return Err(Error::config(format!(
            "he-normal init of a {kh}x{kw}x{c_in}x{c_out} kernel: fan_in is zero"
        )));
    }
    let std = he_std(fan_in);
    let weights = (0..fan_in * c_out)
        .map(|_| T::from_f64(std * rng.standard_normal()))
        .collect();
    ConvKernel::from_parts((kh, kw, c_in, c_out), weights, vec![T::zero(); c_out])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn std_for_sixteen_channel_3x3() {
        assert!((he_std(3 * 3 * 16) - 0.117_851_130_197_757_92).abs() < 1e-12);
    }

    #[test]
    fn sample_statistics() {
        let mut rng = Rng::new(2022);
        let k: ConvKernel<f64> = he_normal_init((3, 3, 16, 10_000 / 144 + 1), &mut rng).unwrap();
        let draws = &k.weights[..10_000];
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let expected = he_std(144);
        assert!((var.sqrt() - expected).abs() < 0.05 * expected);
        assert!(mean.abs() < 3.0 * expected / n.sqrt());
        assert!(k.bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn zero_fan_in_is_a_config_error() {
        let mut rng = Rng::new(0);
        assert!(matches!(
            he_normal_init::<f32>((3, 3, 0, 4), &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn deterministic_per_seed() {
        let a: ConvKernel<f32> = he_normal_init((3, 3, 2, 4), &mut Rng::new(5)).unwrap();
        let b: ConvKernel<f32> = he_normal_init((3, 3, 2, 4), &mut Rng::new(5)).unwrap();
        assert_eq!(a, b);
    }
}

//! Shifted residual codec: `residual = clamp(hr - lr + 127, 0, 255)`.

use super::image::ImageRGB8;
use crate::error::Result;

/// Residual byte meaning "no change".
pub const NO_CHANGE: u8 = 127;

pub fn encode_byte(hr: u8, lr: u8) -> u8 {
    (hr as i16 - lr as i16 + NO_CHANGE as i16).clamp(0, 255) as u8
}

pub fn decode_byte(lr: u8, residual: u8) -> u8 {
    (lr as i16 + residual as i16 - NO_CHANGE as i16).clamp(0, 255) as u8
}

/// Whether `decode(lr, encode(hr, lr))` recovers `hr`: the shifted difference
/// must fit a byte, i.e. `-127 <= hr - lr <= 128`.
pub fn is_lossless(hr: u8, lr: u8) -> bool {
    (-127..=128).contains(&(hr as i16 - lr as i16))
}

pub fn encode_residual(hr: &ImageRGB8, lr: &ImageRGB8) -> Result<ImageRGB8> {
    hr.ensure_same_dims(lr, "encode_residual")?;
    let px = hr
        .pixels()
        .iter()
        .zip(lr.pixels())
        .map(|(&h, &l)| encode_byte(h, l))
        .collect();
    ImageRGB8::new(hr.width(), hr.height(), px)
}

/// Reconstruction by pixel-wise summation: `clamp(lr + residual - 127, 0, 255)`.
pub fn decode_residual(lr: &ImageRGB8, residual: &ImageRGB8) -> Result<ImageRGB8> {
    lr.ensure_same_dims(residual, "decode_residual")?;
    let px = lr
        .pixels()
        .iter()
        .zip(residual.pixels())
        .map(|(&l, &r)| decode_byte(l, r))
        .collect();
    ImageRGB8::new(lr.width(), lr.height(), px)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn shift_arithmetic() {
        assert_eq!(encode_byte(100, 100), 127);
        assert_eq!(encode_byte(150, 100), 177);
        assert_eq!(encode_byte(50, 100), 77);
        assert_eq!(encode_byte(250, 50), 255);
        assert_eq!(decode_byte(0, 255), 128);
        assert_eq!(decode_byte(42, 127), 42);
    }

    #[test]
    fn exhaustive_roundtrip() {
        let mut lossy = 0;
        for hr in 0..=255u8 {
            for lr in 0..=255u8 {
                let back = decode_byte(lr, encode_byte(hr, lr));
                if is_lossless(hr, lr) {
                    assert_eq!(back, hr, "hr {hr} lr {lr}");
                } else {
                    lossy += 1;
                    assert_ne!(back, hr);
                }
            }
        }
        // Pairs with hr - lr >= 129 or <= -128: 127*128/2 + 128*129/2.
        assert_eq!(lossy, 127 * 128 / 2 + 128 * 129 / 2);
    }

    #[test]
    fn identical_images_encode_to_grey() {
        let img = ImageRGB8::from_fn(5, 3, |x, y| [x as u8 * 40, y as u8 * 70, 9]);
        let r = encode_residual(&img, &img).unwrap();
        assert!(r.pixels().iter().all(|&b| b == NO_CHANGE));
        assert_eq!(decode_residual(&img, &r).unwrap(), img);
    }

    #[test]
    fn dimension_mismatch() {
        let a = ImageRGB8::filled(4, 4, [0; 3]);
        let b = ImageRGB8::filled(4, 5, [0; 3]);
        assert!(matches!(encode_residual(&a, &b), Err(Error::Shape(_))));
        assert!(matches!(decode_residual(&a, &b), Err(Error::Shape(_))));
    }
}

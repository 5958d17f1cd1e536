use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Shape, Tensor};

/// 8-bit RGB raster, row-major, three bytes per pixel.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageRGB8 {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for ImageRGB8 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ImageRGB8({}x{})", self.width, self.height)
    }
}

impl ImageRGB8 {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height * 3 {
            return Err(Error::shape(format!(
                "{width}x{height} RGB image needs {} bytes, got {}",
                width * height * 3,
                pixels.len()
            )));
        }
        Ok(ImageRGB8 {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let pixels = rgb.iter().copied().cycle().take(width * height * 3).collect();
        ImageRGB8 {
            width,
            height,
            pixels,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        ImageRGB8 {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<Self> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(Error::shape(format!(
                "crop {width}x{height} at ({x0}, {y0}) exceeds {}x{} image",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity(width * height * 3);
        for y in y0..y0 + height {
            let row = (y * self.width + x0) * 3;
            pixels.extend_from_slice(&self.pixels[row..row + width * 3]);
        }
        ImageRGB8::new(width, height, pixels)
    }

    pub fn flip_horizontal(&self) -> Self {
        ImageRGB8::from_fn(self.width, self.height, |x, y| self.get(self.width - 1 - x, y))
    }

    pub fn flip_vertical(&self) -> Self {
        ImageRGB8::from_fn(self.width, self.height, |x, y| self.get(x, self.height - 1 - y))
    }

    pub fn ensure_same_dims(&self, other: &ImageRGB8, what: &str) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::shape(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

/// Mean squared byte difference over all channels.
pub fn mse(a: &ImageRGB8, b: &ImageRGB8) -> Result<f64> {
    a.ensure_same_dims(b, "mse")?;
    let sum: f64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum();
    Ok(sum / a.pixels().len().max(1) as f64)
}

/// Scales bytes into [0, 1] as a `1 x h x w x 3` tensor.
pub fn normalize<T: Scalar>(image: &ImageRGB8) -> Tensor<T> {
    let scale = T::from_f64(255.0);
    let data = image.pixels().iter().map(|&b| T::from_f64(b as f64) / scale).collect();
    Tensor::from_vec(Shape::new(1, image.height(), image.width(), 3), data)
        .expect("image buffer matches its dimensions")
}

/// Rounds `x` to a byte, half away from zero, clamped to [0, 255].
pub fn quantize(x: f64) -> u8 {
    x.round().clamp(0.0, 255.0) as u8
}

/// Inverse of [`normalize`]: multiplies by 255, rounds half away from zero, clamps.
pub fn denormalize<T: Scalar>(tensor: &Tensor<T>) -> Result<ImageRGB8> {
    let s = tensor.shape();
    if s.n != 1 || s.c != 3 {
        return Err(Error::shape(format!(
            "only 1 x h x w x 3 tensors convert to images, got {s}"
        )));
    }
    let mut pixels = Vec::with_capacity(s.len());
    for (i, &v) in tensor.data().iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Numeric(format!("non-finite value at element {i}")));
        }
        pixels.push(quantize(v.to_f64() * 255.0));
    }
    ImageRGB8::new(s.w, s.h, pixels)
}

fn png_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Png {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Reads an 8-bit PNG as RGB. Greyscale is replicated to three channels;
/// 16-bit samples are reduced to 8 bits; images with alpha are rejected.
pub fn read_png(path: impl AsRef<Path>) -> Result<ImageRGB8> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(|e| png_err(path, e))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| png_err(path, "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| png_err(path, e))?;
    buf.truncate(info.buffer_size());
    let (w, h) = (info.width as usize, info.height as usize);
    let pixels = match info.color_type {
        png::ColorType::Rgb => buf,
        png::ColorType::Grayscale => buf.iter().flat_map(|&g| [g, g, g]).collect(),
        other => {
            return Err(Error::Data(format!(
                "{}: expected 8-bit RGB without alpha, found {other:?}",
                path.display()
            )))
        }
    };
    ImageRGB8::new(w, h, pixels)
}

/// Encodes an 8-bit RGB PNG with fixed settings (balanced deflate, adaptive
/// filtering, no ancillary chunks), so equal images give identical files.
pub fn encode_png(image: &ImageRGB8, out: impl Write) -> std::result::Result<(), png::EncodingError> {
    let mut enc = png::Encoder::new(out, image.width() as u32, image.height() as u32);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    enc.set_compression(png::Compression::Balanced);
    enc.set_filter(png::Filter::Adaptive);
    let mut writer = enc.write_header()?;
    writer.write_image_data(image.pixels())?;
    writer.finish()
}

pub fn write_png(image: &ImageRGB8, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    encode_png(image, &mut out).map_err(|e| png_err(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_image(w: usize, h: usize) -> ImageRGB8 {
        ImageRGB8::from_fn(w, h, |x, y| [(x * 7) as u8, (y * 11) as u8, ((x + y) * 3) as u8])
    }

    #[test]
    fn normalize_roundtrip_all_bytes() {
        let pixels: Vec<u8> = (0..=255u8).flat_map(|b| [b, b, b]).collect();
        let img = ImageRGB8::new(256, 1, pixels).unwrap();
        let t = normalize::<f32>(&img);
        assert_eq!(denormalize(&t).unwrap(), img);
        let t64 = normalize::<f64>(&img);
        assert_eq!(denormalize(&t64).unwrap(), img);
    }

    #[test]
    fn normalize_endpoints_and_midpoint() {
        let img = ImageRGB8::new(3, 1, vec![0, 0, 0, 127, 127, 127, 255, 255, 255]).unwrap();
        let t = normalize::<f32>(&img);
        assert_eq!(t.data()[0], 0.0);
        assert!((t.data()[3] - 0.498_039_2).abs() < 1e-6);
        assert_eq!(t.data()[6], 1.0);
    }

    #[test]
    fn quantize_rounds_half_away_and_clamps() {
        assert_eq!(quantize(127.5), 128);
        assert_eq!(quantize(127.49), 127);
        assert_eq!(quantize(-3.0), 0);
        assert_eq!(quantize(300.0), 255);
    }

    #[test]
    fn crop_and_flips() {
        let img = gradient_image(5, 4);
        let c = img.crop(1, 2, 3, 2).unwrap();
        assert_eq!(c.get(0, 0), img.get(1, 2));
        assert_eq!(c.get(2, 1), img.get(3, 3));
        assert!(img.crop(3, 0, 3, 1).is_err());
        assert_eq!(img.flip_horizontal().get(0, 1), img.get(4, 1));
        assert_eq!(img.flip_vertical().get(2, 0), img.get(2, 3));
        assert_eq!(img.flip_horizontal().flip_horizontal(), img);
    }

    #[test]
    fn png_roundtrip_and_fixed_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let img = gradient_image(17, 9);
        let a = dir.path().join("a.png");
        let b = dir.path().join("b.png");
        write_png(&img, &a).unwrap();
        write_png(&img, &b).unwrap();
        assert_eq!(read_png(&a).unwrap(), img);
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn alpha_png_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgba.png");
        let file = File::create(&path).unwrap();
        let mut enc = png::Encoder::new(file, 2, 1);
        enc.set_color(png::ColorType::Rgba);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        w.finish().unwrap();
        assert!(matches!(read_png(&path), Err(Error::Data(_))));
    }
}

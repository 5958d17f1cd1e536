//! Weights file format.
//!
//! ```text
//! offset 0   b"PSRW"
//! offset 4   u32 LE   format version (1)
//! offset 8   u32 LE   header length H
//! offset 12  H bytes  UTF-8 JSON {"config": UNetConfig, "layers": [{"name", "shape"}]}
//! then       for every layer in header order: kh*kw*c_in*c_out weights,
//!            then c_out biases, all f32 little-endian
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LayerSpec, ModelWeights, UNetConfig};
use crate::error::{Error, Result};
use crate::tensor::ConvKernel;

pub const WEIGHTS_MAGIC: &[u8; 4] = b"PSRW";
pub const WEIGHTS_VERSION: u32 = 1;
const PREAMBLE: usize = 12;

#[derive(Serialize, Deserialize)]
struct Header {
    config: UNetConfig,
    layers: Vec<LayerSpec>,
}

pub fn write_weights(weights: &ModelWeights, mut out: impl Write) -> std::io::Result<()> {
    let header = Header {
        config: *weights.config(),
        layers: weights
            .layers()
            .iter()
            .map(|l| {
                let (kh, kw, ci, co) = l.kernel.dims();
                LayerSpec::new(l.name.clone(), kh, kw, ci, co)
            })
            .collect(),
    };
    let header = serde_json::to_vec(&header).map_err(std::io::Error::other)?;
    let mut buf = Vec::with_capacity(PREAMBLE + header.len() + 4 * weights.param_count());
    buf.extend_from_slice(WEIGHTS_MAGIC);
    buf.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    for l in weights.layers() {
        for v in l.kernel.weights.iter().chain(&l.kernel.bias) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf)
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::format(bytes.len() as u64, format!("file ends before the u32 at byte {at}")))
}

/// Parses a weights file, validating everything before returning.
pub fn read_weights(bytes: &[u8]) -> Result<ModelWeights> {
    if bytes.len() < 4 || &bytes[..4] != WEIGHTS_MAGIC {
        return Err(Error::format(0, "missing PSRW magic"));
    }
    let version = read_u32(bytes, 4)?;
    if version != WEIGHTS_VERSION {
        return Err(Error::format(
            4,
            format!("unsupported version {version}, expected {WEIGHTS_VERSION}"),
        ));
    }
    let header_len = read_u32(bytes, 8)? as usize;
    let header_end = PREAMBLE
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| {
            Error::format(8, format!("header length {header_len} runs past the end of the file"))
        })?;
    let header: Header = serde_json::from_slice(&bytes[PREAMBLE..header_end])
        .map_err(|e| Error::format(PREAMBLE as u64, format!("bad header json: {e}")))?;
    header
        .config
        .validate()
        .map_err(|e| Error::format(PREAMBLE as u64, format!("bad config: {e}")))?;
    let expected = header.config.layer_specs();
    if expected.len() != header.layers.len() {
        return Err(Error::format(
            PREAMBLE as u64,
            format!(
                "header lists {} layers, config requires {}",
                header.layers.len(),
                expected.len()
            ),
        ));
    }
    for (want, got) in expected.iter().zip(&header.layers) {
        if want != got {
            return Err(Error::format(
                PREAMBLE as u64,
                format!(
                    "layer {} has shape {:?} in the header but the config requires {} {:?}",
                    got.name, got.shape, want.name, want.shape
                ),
            ));
        }
    }

    let mut at = header_end;
    let mut kernels = Vec::with_capacity(expected.len());
    for spec in &expected {
        let (kh, kw, ci, co) = spec.dims();
        let mut take = |count: usize| -> Result<Vec<f32>> {
            let end = at + 4 * count;
            let raw = bytes.get(at..end).ok_or_else(|| {
                Error::format(
                    bytes.len() as u64,
                    format!("truncated data for layer {} (needs bytes {at}..{end})", spec.name),
                )
            })?;
            at = end;
            Ok(raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect())
        };
        let weights = take(kh * kw * ci * co)?;
        let bias = take(co)?;
        kernels.push(ConvKernel::from_parts((kh, kw, ci, co), weights, bias)?);
    }
    if at != bytes.len() {
        return Err(Error::format(
            at as u64,
            format!("{} unexpected trailing bytes", bytes.len() - at),
        ));
    }
    ModelWeights::from_layers(header.config, kernels)
}

/// Writes through a temporary sibling file and renames, so a crash never
/// leaves a half-written weights file at `path`.
pub fn save_weights(weights: &ModelWeights, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_weights(weights, &mut buf).map_err(|e| Error::io(path, e))?;
    let tmp = path.with_extension("psrw.tmp");
    fs::write(&tmp, &buf).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<ModelWeights> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_weights(&bytes)
}

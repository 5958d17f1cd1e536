//! Renders a few synthetic histology-like images and writes them as PNGs.
//!
//! cargo run --release --example synth_textures -- [out_dir] [count] [seed]

use std::path::PathBuf;

use placenta_sr::data::{synth_generate, write_png};

fn main() -> placenta_sr::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/synth".into()));
    let count: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(4);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    std::fs::create_dir_all(&out).map_err(|e| placenta_sr::Error::Io { path: out.clone(), source: e })?;
    for (i, img) in synth_generate(count, 256, 256, seed).iter().enumerate() {
        let path = out.join(format!("synth_{i:04}.png"));
        write_png(img, &path)?;
        let mean: f64 = img.pixels().iter().map(|&v| v as f64).sum::<f64>() / img.pixels().len() as f64;
        println!("{}  mean intensity {mean:.1}", path.display());
    }
    Ok(())
}

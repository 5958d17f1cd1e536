//! Predicts the residual of a low-resolution image and reconstructs it.
//! Without a weights file the final layer is zeroed, which predicts
//! "no change" everywhere.
//!
//! cargo run --release --example predict_and_reconstruct -- [weights.psrw] [out_dir]

use std::path::PathBuf;

use placenta_sr::data::{decode_residual, degrade, mse, synth_generate, write_png};
use placenta_sr::model::{load_weights, predict_residual, ModelWeights, UNetConfig};

fn main() -> placenta_sr::Result<()> {
    let mut args = std::env::args().skip(1);
    let weights = match args.next() {
        Some(path) => load_weights(path)?,
        None => {
            let mut w = ModelWeights::build(UNetConfig::toy(2, 8, 64), 0)?;
            w.set_constant_output(0.0);
            w
        }
    };
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/predict".into()));
    std::fs::create_dir_all(&out).map_err(|e| placenta_sr::Error::Io { path: out.clone(), source: e })?;

    let d = weights.config().size_divisor();
    let hr = synth_generate(1, 16 * d, 16 * d, 99).remove(0);
    let lr = degrade(&hr, 2)?;
    let residual = predict_residual(&weights, &lr)?;
    let reconstructed = decode_residual(&lr, &residual)?;

    println!("MSE(lr, hr)            {:.3}", mse(&lr, &hr)?);
    println!("MSE(reconstructed, hr) {:.3}", mse(&reconstructed, &hr)?);
    for (name, img) in [("hr", &hr), ("lr", &lr), ("residual", &residual), ("reconstructed", &reconstructed)] {
        write_png(img, out.join(format!("{name}.png")))?;
    }
    println!("wrote panels to {}", out.display());
    Ok(())
}

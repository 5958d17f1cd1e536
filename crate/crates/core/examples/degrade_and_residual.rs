//! Degrades an image by cubic down/up resampling, encodes the shifted
//! residual, and checks that decoding restores the original.
//!
//! cargo run --release --example degrade_and_residual -- [input.png] [out_dir]

use std::path::PathBuf;

use placenta_sr::data::{
    decode_residual, degrade, encode_residual, mse, read_png, synth_generate, write_png,
    ImageRGB8, NO_CHANGE,
};

fn main() -> placenta_sr::Result<()> {
    let mut args = std::env::args().skip(1);
    let hr: ImageRGB8 = match args.next() {
        Some(path) => read_png(path)?,
        None => synth_generate(1, 256, 256, 3).remove(0),
    };
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/degrade".into()));
    std::fs::create_dir_all(&out).map_err(|e| placenta_sr::Error::Io { path: out.clone(), source: e })?;

    let lr = degrade(&hr, 2)?;
    let residual = encode_residual(&hr, &lr)?;
    let restored = decode_residual(&lr, &residual)?;

    let saturated = residual.pixels().iter().filter(|&&v| v == 0 || v == 255).count();
    let near = residual.pixels().iter().filter(|&&v| v.abs_diff(NO_CHANGE) <= 4).count();
    println!("image {}x{}", hr.width(), hr.height());
    println!("MSE(lr, hr)       {:.3}", mse(&lr, &hr)?);
    println!("MSE(restored, hr) {:.3}", mse(&restored, &hr)?);
    println!("residual bytes within 4 of {NO_CHANGE}: {:.1}%", 100.0 * near as f64 / residual.pixels().len() as f64);
    println!("saturated residual bytes: {saturated}");

    write_png(&hr, out.join("hr.png"))?;
    write_png(&lr, out.join("lr.png"))?;
    write_png(&residual, out.join("residual.png"))?;
    println!("wrote hr.png, lr.png, residual.png to {}", out.display());
    Ok(())
}

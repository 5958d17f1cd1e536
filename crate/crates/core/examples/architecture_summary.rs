//! Prints the layer table of a U-Net configuration.
//!
//! cargo run --release --example architecture_summary -- [levels] [base_channels]

use placenta_sr::model::UNetConfig;

fn main() -> placenta_sr::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().ok());
    let mut config = UNetConfig::default();
    if let Some(levels) = args.next().flatten() {
        config.levels = levels;
    }
    if let Some(base) = args.next().flatten() {
        config.base_channels = base;
    }
    config.validate()?;

    println!("{:<18} {:>7} {:>6} {:>6} {:>9}", "layer", "kernel", "in", "out", "params");
    for spec in config.layer_specs() {
        let (kh, kw, ci, co) = spec.dims();
        println!("{:<18} {:>7} {:>6} {:>6} {:>9}", spec.name, format!("{kh}x{kw}"), ci, co, kh * kw * ci * co + co);
    }
    println!("total parameters: {}", config.param_count());
    println!(
        "input {}x{}x3, sides must be multiples of {}",
        config.input_height,
        config.input_width,
        config.size_divisor()
    );
    Ok(())
}

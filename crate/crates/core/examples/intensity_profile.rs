//! Red-channel intensities of a sharp image and its degraded copy along a
//! diagonal line, printed as CSV.
//!
//! cargo run --release --example intensity_profile

use placenta_sr::cli::intensity_profile;
use placenta_sr::data::{degrade, synth_generate};

fn main() -> placenta_sr::Result<()> {
    let hr = synth_generate(1, 128, 128, 5).remove(0);
    let lr = degrade(&hr, 2)?;
    print!("{}", intensity_profile(&hr, &lr, (10, 20), (100, 60))?);
    Ok(())
}

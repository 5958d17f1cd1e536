//! Compares analytic U-Net parameter gradients with central finite
//! differences on a small double-precision network.
//!
//! cargo run --release --example gradient_check -- [levels] [base_channels] [size]

use placenta_sr::model::{backward, forward, ModelWeights, UNetConfig};
use placenta_sr::tensor::bce_loss;
use placenta_sr::tensor::gradcheck::check_gradient;
use placenta_sr::tensor::{Shape, Tensor};
use placenta_sr::Rng;

fn main() -> placenta_sr::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().ok());
    let levels = args.next().flatten().unwrap_or(1);
    let base = args.next().flatten().unwrap_or(2);
    let size = args.next().flatten().unwrap_or(8);

    let weights = ModelWeights::<f64>::build(UNetConfig::toy(levels, base, size), 1)?;
    let mut rng = Rng::new(2);
    let shape = Shape::new(1, size, size, 3);
    let x = Tensor::<f64>::from_fn(shape, |_| rng.uniform());
    let target = Tensor::<f64>::from_fn(shape, |_| rng.uniform());

    let (y, cache) = forward(&weights, &x)?;
    let (loss, dy) = bce_loss(&y, &target)?;
    let grads = backward(&weights, &cache, &dy)?;
    let analytic: Vec<f64> = grads.iter().flat_map(|g| g.weights.iter().chain(&g.bias).copied()).collect();

    let mut probe = weights.clone();
    let report = check_gradient(&weights.flat_params(), 1e-3, &analytic, |p| {
        probe.set_flat_params(p)?;
        let (y, c) = forward(&probe, &x)?;
        if !c.same_branches(&cache) {
            return Ok(None);
        }
        Ok(Some(bce_loss(&y, &target)?.0))
    })?;

    println!("levels {levels}, base {base}, {size}x{size}: {} parameters, loss {loss:.6}", weights.param_count());
    println!("checked {}, skipped {} (kink crossings)", report.checked, report.skipped);
    println!(
        "max relative error {:.3e} at parameter {} (analytic {:.6e}, numeric {:.6e})",
        report.max_rel_error, report.worst_index, report.analytic_at_worst, report.numeric_at_worst
    );
    Ok(())
}

//! Trains a small U-Net on synthetic patches and compares it with the
//! do-nothing baseline.
//!
//! cargo run --release --example train_toy -- [epochs] [out_dir]

use std::path::PathBuf;

use placenta_sr::data::{augment, split, synth_generate, Dataset, PairedSample};
use placenta_sr::model::{save_weights, ModelWeights, UNetConfig};
use placenta_sr::train::{evaluate_rmse, train, MetricsRecord, NoChangePredictor, TrainConfig, TrainObserver};
use placenta_sr::Rng;

struct Progress;

impl TrainObserver for Progress {
    fn on_epoch(&mut self, r: &MetricsRecord, _: &ModelWeights, improved: bool) -> placenta_sr::Result<()> {
        let rmse = r.rmse_test.map(|v| format!("  test rMSE {v:.6}")).unwrap_or_default();
        println!("epoch {:3}  loss {:.6}{}{rmse}", r.epoch, r.loss, if improved { " *" } else { "  " });
        Ok(())
    }
}

fn main() -> placenta_sr::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/train".into()));

    let rng = Rng::new(7);
    let sources = synth_generate(8, 256, 256, 7);
    let patches = augment(&sources, 60, 64, &mut rng.fork(1))?;
    let samples = patches
        .into_iter()
        .map(|p| PairedSample::from_hr(p, 2))
        .collect::<placenta_sr::Result<Vec<_>>>()?;
    let data = Dataset::split_samples(samples, &split(60, 48, 12, &mut rng.fork(2))?);

    let config = TrainConfig { max_epochs: epochs, eval_every: 5, seed: 7, ..TrainConfig::default() };
    let weights = ModelWeights::build(UNetConfig::toy(2, 8, 64), 7)?;
    println!("{} parameters, {} train / {} test patches", weights.param_count(), data.train.len(), data.test.len());

    let outcome = train(&config, weights, &data, &mut Progress)?;
    let model = evaluate_rmse(&outcome.last, &data.test)?;
    let baseline = evaluate_rmse(&NoChangePredictor, &data.test)?;
    println!("test reconstruction rMSE {:.6} (baseline {:.6})", model.reconstruction, baseline.reconstruction);

    std::fs::create_dir_all(&out).map_err(|e| placenta_sr::Error::Io { path: out.clone(), source: e })?;
    save_weights(&outcome.last, out.join("weights.psrw"))?;
    println!("saved {}", out.join("weights.psrw").display());
    Ok(())
}

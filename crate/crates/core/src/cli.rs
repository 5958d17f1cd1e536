//! `placenta-sr` subcommands.
//!
//! Settings resolve as command-line flag, then the `--config` JSON file, then
//! the built-in default. The file may hold a top-level `seed` and the
//! sections `synth`, `dataset`, `model` and `train`; every field is optional.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{
    augment, decode_residual, degrade, encode_residual, read_png, split, synth_generate,
    write_png, Dataset, DatasetManifest, ImageRGB8, ManifestEntry, PairedSample, SplitTag,
};
use crate::error::{Error, Result};
use crate::model::{load_weights, predict_residual, save_weights, ModelWeights, UNetConfig};
use crate::train::{evaluate_rmse, train, MetricsCsv, MetricsRecord, TrainConfig, TrainObserver};
use crate::Rng;

/// Relative MSE reported for the full-scale model (train, test).
pub const REFERENCE_RMSE: (f64, f64) = (0.002, 0.003);

#[derive(Debug, Parser)]
#[command(name = "placenta-sr", version, about = "Residual U-Net resolution enhancement")]
pub struct Cli {
    /// Master seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON file with default settings; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print the resolved settings and progress to stderr.
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render synthetic histology-like images.
    Synth(SynthArgs),
    /// Degrade one image by cubic down/up resampling.
    Degrade(DegradeArgs),
    /// Crop, flip, degrade and split source images into a paired dataset.
    BuildDataset(BuildDatasetArgs),
    /// Train a U-Net on a dataset manifest.
    Train(TrainArgs),
    /// Predict the residual of one image and reconstruct it.
    Predict(PredictArgs),
    /// Report relative MSE of a model on one split.
    Evaluate(EvaluateArgs),
    /// Sample red-channel intensities of two images along a line.
    Profile(ProfileArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct DegradeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub factor: usize,
    /// Also write the encoded residual of the input against its degradation.
    #[arg(long)]
    pub out_residual: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildDatasetArgs {
    /// Directory of source PNGs, read in file-name order.
    #[arg(long)]
    pub src_dir: PathBuf,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long)]
    pub factor: Option<usize>,
    #[arg(long)]
    pub train: Option<usize>,
    #[arg(long)]
    pub test: Option<usize>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub base_channels: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Evaluate relative MSE every N epochs (0 = last epoch only).
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Save a checkpoint every N epochs (0 = never).
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Record wall-clock epoch times in the metrics CSV.
    #[arg(long)]
    pub timing: bool,
    /// Output directory for weights, checkpoints and metrics.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out_residual: PathBuf,
    #[arg(long)]
    pub out_reconstructed: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: SplitTag,
    /// Append the report as CSV to this file.
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub image_a: PathBuf,
    #[arg(long)]
    pub image_b: PathBuf,
    #[arg(long)]
    pub x0: usize,
    #[arg(long)]
    pub y0: usize,
    #[arg(long)]
    pub x1: usize,
    #[arg(long)]
    pub y1: usize,
    #[arg(long)]
    pub out_csv: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub count: usize,
    pub width: usize,
    pub height: usize,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings {
            count: 32,
            width: 1024,
            height: 1524,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSettings {
    pub count: usize,
    pub patch: usize,
    pub factor: usize,
    pub train: usize,
    pub test: usize,
}

impl Default for DatasetSettings {
    fn default() -> Self {
        DatasetSettings {
            count: 1320,
            patch: 512,
            factor: 2,
            train: 1000,
            test: 320,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSettings {
    pub levels: usize,
    pub base_channels: usize,
    pub convs_per_block: usize,
    pub kernel_size: usize,
}

impl Default for ModelSettings {
    fn default() -> Self {
        let d = UNetConfig::default();
        ModelSettings {
            levels: d.levels,
            base_channels: d.base_channels,
            convs_per_block: d.convs_per_block,
            kernel_size: d.kernel_size,
        }
    }
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub synth: SynthSettings,
    pub dataset: DatasetSettings,
    pub model: ModelSettings,
    pub train: TrainConfig,
    /// Save a training checkpoint every this many epochs (0 = never).
    pub checkpoint_every: usize,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile {
            seed: None,
            synth: SynthSettings::default(),
            dataset: DatasetSettings::default(),
            model: ModelSettings::default(),
            train: TrainConfig::default(),
            checkpoint_every: 50,
        }
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("config file {}: {e}", path.display())))
    }
}

struct Context {
    seed: u64,
    file: ConfigFile,
    verbose: bool,
}

impl Context {
    fn show(&self, command: &str, settings: serde_json::Value) {
        if self.verbose {
            let resolved = serde_json::json!({
                "command": command,
                "seed": self.seed,
                "settings": settings,
            });
            eprintln!("resolved config: {resolved}");
        }
    }
}

fn json<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("settings serialize to JSON")
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Parse failures, including `--help`, come back as configuration errors.
pub fn run_from<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::config(e.to_string()))?;
    run(cli)
}

/// Process entry point: returns the exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let ctx = Context {
        seed: cli.seed.or(file.seed).unwrap_or(0),
        file,
        verbose: cli.verbose,
    };
    match &cli.command {
        Command::Synth(a) => cmd_synth(&ctx, a),
        Command::Degrade(a) => cmd_degrade(&ctx, a),
        Command::BuildDataset(a) => cmd_build_dataset(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Predict(a) => cmd_predict(&ctx, a),
        Command::Evaluate(a) => cmd_evaluate(&ctx, a),
        Command::Profile(a) => cmd_profile(&ctx, a),
    }
}

fn cmd_synth(ctx: &Context, a: &SynthArgs) -> Result<()> {
    let mut s = ctx.file.synth.clone();
    s.count = a.count.unwrap_or(s.count);
    s.width = a.width.unwrap_or(s.width);
    s.height = a.height.unwrap_or(s.height);
    ctx.show("synth", json(&s));
    if s.width == 0 || s.height == 0 {
        return Err(Error::config("synthetic images need a non-zero size"));
    }
    create_dir(&a.out_dir)?;
    for (i, img) in synth_generate(s.count, s.width, s.height, ctx.seed)
        .iter()
        .enumerate()
    {
        write_png(img, a.out_dir.join(format!("synth_{i:04}.png")))?;
    }
    println!("wrote {} images to {}", s.count, a.out_dir.display());
    Ok(())
}

fn cmd_degrade(ctx: &Context, a: &DegradeArgs) -> Result<()> {
    ctx.show("degrade", serde_json::json!({ "factor": a.factor }));
    let hr = read_png(&a.input)?;
    let lr = degrade(&hr, a.factor)?;
    write_png(&lr, &a.out)?;
    if let Some(path) = &a.out_residual {
        write_png(&encode_residual(&hr, &lr)?, path)?;
    }
    Ok(())
}

fn source_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::config(format!("no PNG files in {}", dir.display())));
    }
    Ok(paths)
}

fn cmd_build_dataset(ctx: &Context, a: &BuildDatasetArgs) -> Result<()> {
    let mut s = ctx.file.dataset.clone();
    s.count = a.count.unwrap_or(s.count);
    s.patch = a.patch.unwrap_or(s.patch);
    s.factor = a.factor.unwrap_or(s.factor);
    s.train = a.train.unwrap_or(s.train);
    s.test = a.test.unwrap_or(s.test);
    ctx.show("build-dataset", json(&s));
    if s.train + s.test > s.count {
        return Err(Error::config(format!(
            "--count {} is smaller than --train {} + --test {}",
            s.count, s.train, s.test
        )));
    }

    let sources = source_pngs(&a.src_dir)?
        .iter()
        .map(read_png)
        .collect::<Result<Vec<_>>>()?;
    let root = Rng::new(ctx.seed);
    let patches = augment(&sources, s.count, s.patch, &mut root.fork(1))?;
    let assignment = split(s.count, s.train, s.test, &mut root.fork(2))?;
    let tags = assignment.tags(s.count);

    for sub in ["lr", "hr", "residual"] {
        create_dir(&a.out_dir.join(sub))?;
    }
    let mut manifest = DatasetManifest {
        degrade_factor: s.factor,
        patch: s.patch,
        seed: ctx.seed,
        samples: Vec::new(),
    };
    let mut written = Dataset::default();
    for (i, (hr, tag)) in patches.into_iter().zip(tags).enumerate() {
        let Some(tag) = tag else { continue };
        let sample = PairedSample::from_hr(hr, s.factor)?;
        let entry = ManifestEntry {
            lr: format!("lr/{i:04}.png"),
            hr: format!("hr/{i:04}.png"),
            residual: format!("residual/{i:04}.png"),
            split: tag,
        };
        write_png(&sample.lr, a.out_dir.join(&entry.lr))?;
        write_png(&sample.hr, a.out_dir.join(&entry.hr))?;
        write_png(&sample.residual, a.out_dir.join(&entry.residual))?;
        manifest.samples.push(entry);
        match tag {
            SplitTag::Train => written.train.push(sample),
            SplitTag::Test => written.test.push(sample),
        }
    }
    let manifest_path = a.out_dir.join("manifest.json");
    manifest.save(&manifest_path)?;
    audit_dataset(&manifest_path, &written, s.train, s.test)?;
    println!(
        "wrote {} train + {} test samples to {}",
        s.train,
        s.test,
        a.out_dir.display()
    );
    Ok(())
}

/// Reloads a freshly written dataset and checks it against what was meant to
/// be written: residual consistency, split sizes, and no shared files.
fn audit_dataset(manifest_path: &Path, expected: &Dataset, n_train: usize, n_test: usize) -> Result<()> {
    let (manifest, loaded) = Dataset::load_manifest(manifest_path)?;
    if manifest.count(SplitTag::Train) != n_train || manifest.count(SplitTag::Test) != n_test {
        return Err(Error::Data("audit: split sizes differ from the request".into()));
    }
    let mut files = std::collections::HashSet::new();
    for e in &manifest.samples {
        for f in [&e.lr, &e.hr, &e.residual] {
            if !files.insert(f.as_str()) {
                return Err(Error::Data(format!("audit: {f} is listed twice")));
            }
        }
    }
    if loaded.train != expected.train || loaded.test != expected.test {
        return Err(Error::Data("audit: images on disk differ from those written".into()));
    }
    Ok(())
}

struct TrainFiles {
    metrics: MetricsCsv<BufWriter<File>>,
    out: PathBuf,
    checkpoint_every: usize,
    verbose: bool,
}

impl TrainObserver for TrainFiles {
    fn on_epoch(&mut self, r: &MetricsRecord, weights: &ModelWeights, improved: bool) -> Result<()> {
        self.metrics.log(r)?;
        if improved {
            save_weights(weights, self.out.join("best.psrw"))?;
        }
        if self.checkpoint_every > 0 && r.epoch.is_multiple_of(self.checkpoint_every) {
            let dir = self.out.join("checkpoints");
            create_dir(&dir)?;
            save_weights(weights, dir.join(format!("epoch_{:04}.psrw", r.epoch)))?;
        }
        if self.verbose {
            let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
            eprintln!(
                "epoch {:4}  loss {:.6}  rmse train {}  test {}",
                r.epoch,
                r.loss,
                opt(r.rmse_train),
                opt(r.rmse_test)
            );
        }
        Ok(())
    }
}

fn cmd_train(ctx: &Context, a: &TrainArgs) -> Result<()> {
    let mut m = ctx.file.model.clone();
    m.levels = a.levels.unwrap_or(m.levels);
    m.base_channels = a.base_channels.unwrap_or(m.base_channels);
    let mut t = ctx.file.train;
    t.learning_rate = a.lr.unwrap_or(t.learning_rate);
    t.batch_size = a.batch.unwrap_or(t.batch_size);
    t.max_epochs = a.epochs.unwrap_or(t.max_epochs);
    t.patience = a.patience.unwrap_or(t.patience);
    t.eval_every = a.eval_every.unwrap_or(t.eval_every);
    t.seed = ctx.seed;
    let checkpoint_every = a.checkpoint_every.unwrap_or(ctx.file.checkpoint_every);
    ctx.show(
        "train",
        serde_json::json!({ "model": json(&m), "train": json(&t), "checkpoint_every": checkpoint_every }),
    );
    t.validate()?;

    let (manifest, data) = Dataset::load_manifest(&a.manifest)?;
    let config = UNetConfig {
        levels: m.levels,
        base_channels: m.base_channels,
        convs_per_block: m.convs_per_block,
        kernel_size: m.kernel_size,
        input_height: manifest.patch,
        input_width: manifest.patch,
        ..UNetConfig::default()
    };
    let weights = ModelWeights::build(config, ctx.seed)?;

    create_dir(&a.out)?;
    let metrics_path = a.out.join("metrics.csv");
    let file = File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    let mut files = TrainFiles {
        metrics: MetricsCsv::new(BufWriter::new(file), a.timing),
        out: a.out.clone(),
        checkpoint_every,
        verbose: ctx.verbose,
    };
    let outcome = train(&t, weights, &data, &mut files)?;
    save_weights(&outcome.last, a.out.join("weights.psrw"))?;

    let last = outcome.history.last().expect("at least one epoch ran");
    println!(
        "trained {} epochs{}; final loss {:.6}, best loss at epoch {}",
        last.epoch,
        if outcome.stopped_early { " (early stop)" } else { "" },
        last.loss,
        outcome.best_epoch
    );
    if let Some(r) = last.rmse_test.or(last.rmse_train) {
        println!("final reconstruction rMSE {r:.6}");
    }
    Ok(())
}

fn cmd_predict(ctx: &Context, a: &PredictArgs) -> Result<()> {
    ctx.show("predict", serde_json::json!({}));
    let weights = load_weights(&a.weights)?;
    let lr = read_png(&a.input)?;
    let residual = predict_residual(&weights, &lr)?;
    let reconstructed = decode_residual(&lr, &residual)?;
    write_png(&residual, &a.out_residual)?;
    write_png(&reconstructed, &a.out_reconstructed)
}

fn cmd_evaluate(ctx: &Context, a: &EvaluateArgs) -> Result<()> {
    ctx.show("evaluate", serde_json::json!({ "split": a.split }));
    let manifest = DatasetManifest::load(&a.manifest)?;
    if manifest.count(a.split) == 0 {
        return Err(Error::config(format!("manifest has no {} samples", a.split)));
    }
    let weights = load_weights(&a.weights)?;
    let data = Dataset::load(&manifest, crate::data::manifest_root(&a.manifest))?;
    let r = evaluate_rmse(&weights, data.get(a.split))?;
    println!("split {} ({} images)", a.split, r.images);
    println!("reconstruction rMSE {:.6}", r.reconstruction);
    println!("residual rMSE       {:.6}", r.residual);
    println!("baseline rMSE       {:.6}", r.baseline);
    println!(
        "reference rMSE (full-scale model, reported): train {}, test {}",
        REFERENCE_RMSE.0, REFERENCE_RMSE.1
    );
    if let Some(path) = &a.out_csv {
        let fresh = !path.exists();
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut text = String::new();
        if fresh {
            text.push_str("split,images,reconstruction,residual,baseline\n");
        }
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            a.split, r.images, r.reconstruction, r.residual, r.baseline
        ));
        f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Integer points of the segment from `(x0, y0)` to `(x1, y1)`, both ends
/// included, by Bresenham's algorithm.
pub fn bresenham(x0: i64, y0: i64, x1: i64, y1: i64) -> Vec<(i64, i64)> {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = ((x1 - x0).signum(), (y1 - y0).signum());
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    let mut points = Vec::with_capacity((dx.max(-dy) + 1) as usize);
    loop {
        points.push((x, y));
        if x == x1 && y == y1 {
            return points;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// CSV of the red channel of both images along a Bresenham line.
pub fn intensity_profile(
    a: &ImageRGB8,
    b: &ImageRGB8,
    from: (usize, usize),
    to: (usize, usize),
) -> Result<String> {
    a.ensure_same_dims(b, "profile images")?;
    for (x, y) in [from, to] {
        if x >= a.width() || y >= a.height() {
            return Err(Error::config(format!(
                "endpoint ({x}, {y}) is outside the {}x{} image",
                a.width(),
                a.height()
            )));
        }
    }
    let mut csv = String::from("index,x,y,red_a,red_b\n");
    let line = bresenham(from.0 as i64, from.1 as i64, to.0 as i64, to.1 as i64);
    for (i, (x, y)) in line.into_iter().enumerate() {
        let (x, y) = (x as usize, y as usize);
        csv.push_str(&format!("{i},{x},{y},{},{}\n", a.get(x, y)[0], b.get(x, y)[0]));
    }
    Ok(csv)
}

fn cmd_profile(ctx: &Context, a: &ProfileArgs) -> Result<()> {
    ctx.show(
        "profile",
        serde_json::json!({ "from": [a.x0, a.y0], "to": [a.x1, a.y1] }),
    );
    let img_a = read_png(&a.image_a)?;
    let img_b = read_png(&a.image_b)?;
    let csv = intensity_profile(&img_a, &img_b, (a.x0, a.y0), (a.x1, a.y1))?;
    fs::write(&a.out_csv, csv).map_err(|e| Error::io(&a.out_csv, e))
}

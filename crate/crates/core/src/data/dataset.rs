//! Paired samples, train/test splitting and the dataset manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::image::{read_png, ImageRGB8};
use super::resample::degrade;
use super::residual::encode_residual;
use crate::error::{Error, Result};
use crate::Rng;

/// A ground-truth image with its degraded input and encoded residual target.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pub lr: ImageRGB8,
    pub hr: ImageRGB8,
    pub residual: ImageRGB8,
}

impl PairedSample {
    pub fn from_hr(hr: ImageRGB8, factor: usize) -> Result<Self> {
        let lr = degrade(&hr, factor)?;
        let residual = encode_residual(&hr, &lr)?;
        Ok(PairedSample { lr, hr, residual })
    }

    pub fn new(lr: ImageRGB8, hr: ImageRGB8, residual: ImageRGB8) -> Result<Self> {
        let s = PairedSample { lr, hr, residual };
        s.verify()?;
        Ok(s)
    }

    /// Checks shared dimensions and `residual == encode_residual(hr, lr)`.
    pub fn verify(&self) -> Result<()> {
        self.lr.ensure_same_dims(&self.hr, "paired sample lr/hr")?;
        self.lr.ensure_same_dims(&self.residual, "paired sample lr/residual")?;
        if encode_residual(&self.hr, &self.lr)? != self.residual {
            return Err(Error::Data(
                "residual image is not encode_residual(hr, lr)".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Test,
}

impl std::str::FromStr for SplitTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitTag::Train),
            "test" => Ok(SplitTag::Test),
            other => Err(Error::config(format!(
                "unknown split {other:?}, expected train or test"
            ))),
        }
    }
}

impl std::fmt::Display for SplitTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SplitTag::Train => "train",
            SplitTag::Test => "test",
        })
    }
}

/// Sample indices assigned to each split, in shuffled order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// Split tag of every index in `0..count`, `None` when unselected.
    pub fn tags(&self, count: usize) -> Vec<Option<SplitTag>> {
        let mut tags = vec![None; count];
        for &i in &self.train {
            tags[i] = Some(SplitTag::Train);
        }
        for &i in &self.test {
            tags[i] = Some(SplitTag::Test);
        }
        tags
    }
}

/// Seeded shuffle of `0..count`, then the first `n_train` go to train and the
/// next `n_test` to test.
pub fn split(count: usize, n_train: usize, n_test: usize, rng: &mut Rng) -> Result<Split> {
    if n_train + n_test > count {
        return Err(Error::config(format!(
            "cannot take {n_train} train + {n_test} test samples from {count}"
        )));
    }
    let mut order: Vec<usize> = (0..count).collect();
    rng.shuffle(&mut order);
    Ok(Split {
        train: order[..n_train].to_vec(),
        test: order[n_train..n_train + n_test].to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub lr: String,
    pub hr: String,
    pub residual: String,
    pub split: SplitTag,
}

/// On-disk dataset description. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub degrade_factor: usize,
    pub patch: usize,
    pub seed: u64,
    pub samples: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn count(&self, split: SplitTag) -> usize {
        self.samples.iter().filter(|s| s.split == split).count()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| {
            Error::format(0, format!("manifest {}: {e}", path.display()))
        })
    }

    /// Pretty-printed JSON with a trailing newline.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// In-memory train and test samples.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub train: Vec<PairedSample>,
    pub test: Vec<PairedSample>,
}

impl Dataset {
    pub fn split_samples(samples: Vec<PairedSample>, split: &Split) -> Self {
        let mut slots: Vec<Option<PairedSample>> = samples.into_iter().map(Some).collect();
        let mut take = |ids: &[usize]| -> Vec<PairedSample> {
            ids.iter()
                .map(|&i| slots[i].take().expect("split indices are distinct"))
                .collect()
        };
        let train = take(&split.train);
        let test = take(&split.test);
        Dataset { train, test }
    }

    pub fn get(&self, split: SplitTag) -> &[PairedSample] {
        match split {
            SplitTag::Train => &self.train,
            SplitTag::Test => &self.test,
        }
    }

    /// Loads every image of `manifest` (located in `root`) in manifest order
    /// and verifies each triplet.
    pub fn load(manifest: &DatasetManifest, root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        let mut ds = Dataset::default();
        for entry in &manifest.samples {
            let sample = load_entry(entry, root)?;
            match entry.split {
                SplitTag::Train => ds.train.push(sample),
                SplitTag::Test => ds.test.push(sample),
            }
        }
        Ok(ds)
    }

    /// Reads the manifest at `path` and loads it relative to its directory.
    pub fn load_manifest(path: impl AsRef<Path>) -> Result<(DatasetManifest, Self)> {
        let path = path.as_ref();
        let manifest = DatasetManifest::load(path)?;
        let ds = Self::load(&manifest, manifest_root(path))?;
        Ok((manifest, ds))
    }
}

pub fn manifest_root(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default()
}

fn load_entry(entry: &ManifestEntry, root: &Path) -> Result<PairedSample> {
    let lr = read_png(root.join(&entry.lr))?;
    let hr = read_png(root.join(&entry.hr))?;
    let residual = read_png(root.join(&entry.residual))?;
    PairedSample::new(lr, hr, residual)
        .map_err(|e| Error::Data(format!("sample {}: {e}", entry.hr)))
}

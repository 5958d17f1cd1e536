use super::image::ImageRGB8;
use crate::error::{Error, Result};
use crate::Rng;

/// Draws `count` square patches of side `patch` from `sources`.
///
/// Each patch takes, in this order: a uniform source index, a uniform
/// top-left x, a uniform top-left y, a horizontal flip coin, a vertical
/// flip coin. Crops are independent and may overlap.
pub fn augment(
    sources: &[ImageRGB8],
    count: usize,
    patch: usize,
    rng: &mut Rng,
) -> Result<Vec<ImageRGB8>> {
    if patch == 0 {
        return Err(Error::config("patch size must be at least 1"));
    }
    if sources.is_empty() && count > 0 {
        return Err(Error::config("no source images to augment"));
    }
    for (i, s) in sources.iter().enumerate() {
        if s.width() < patch || s.height() < patch {
            return Err(Error::config(format!(
                "source image {i} is {}x{}, smaller than the {patch}x{patch} patch",
                s.width(),
                s.height()
            )));
        }
    }
    (0..count)
        .map(|_| {
            let src = &sources[rng.below(sources.len())];
            let x = rng.below(src.width() - patch + 1);
            let y = rng.below(src.height() - patch + 1);
            let mut p = src.crop(x, y, patch, patch)?;
            if rng.coin() {
                p = p.flip_horizontal();
            }
            if rng.coin() {
                p = p.flip_vertical();
            }
            Ok(p)
        })
        .collect()
}

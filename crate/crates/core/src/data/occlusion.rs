//! Random square block occlusion with an unrelated image.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::dataset::read_image;
use crate::error::{Error, Result};
use crate::modality::ImagePlane;

/// Accepted range of the occluded area fraction.
pub const FRACTION_RANGE: std::ops::RangeInclusive<f64> = 0.05..=0.95;

/// Where a block was pasted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OcclusionBlock {
    pub x: usize,
    pub y: usize,
    pub side: usize,
}

impl OcclusionBlock {
    pub fn area(&self) -> usize {
        self.side * self.side
    }
}

/// Block side for a nominal area fraction.
///
/// The side is `round(√(fraction · width · height))`, capped at the smaller
/// image dimension, so the covered area tracks the nominal fraction on
/// non-square images too. On square images this equals
/// `round(min(width, height) · √fraction)`.
pub fn block_side(width: usize, height: usize, fraction: f64) -> usize {
    let side = (fraction * (width * height) as f64).sqrt().round() as usize;
    side.clamp(1, width.min(height))
}

/// Replaces a uniformly placed square block with `patch` resized to the
/// block.
///
/// Channels of the patch are converted to those of the image (luma for
/// grayscale, replication for color).
pub fn occlude(img: &ImagePlane, fraction: f64, seed: u64, patch: &ImagePlane) -> Result<(ImagePlane, OcclusionBlock)> {
    if !FRACTION_RANGE.contains(&fraction) {
        return Err(Error::InvalidParameter(format!(
            "occlusion fraction must lie in [0.05, 0.95], got {fraction}"
        )));
    }
    let (w, h) = (img.width(), img.height());
    let side = block_side(w, h, fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = rng.random_range(0..=w - side);
    let y = rng.random_range(0..=h - side);
    let block = patch.resize(side, side)?;
    let block = match (block.channels(), img.channels()) {
        (3, 1) => block.to_grayscale(),
        (1, 3) => ImagePlane::from_fn(side, side, 3, |px, py, _| block.get(px, py, 0))?,
        _ => block,
    };
    let mut out = img.clone();
    for py in 0..side {
        for px in 0..side {
            for c in 0..img.channels() {
                out.set(x + px, y + py, c, block.get(px, py, c));
            }
        }
    }
    Ok((out, OcclusionBlock { x, y, side }))
}

/// Three procedural textures usable as occluders: a colored checkerboard,
/// diagonal stripes and seeded uniform noise.
pub fn builtin_patches() -> Vec<ImagePlane> {
    let size = 32;
    let checker = ImagePlane::from_fn(size, size, 3, |x, y, c| {
        let on = ((x / 4) + (y / 4)) % 2 == 0;
        match (on, c) {
            (true, 0) => 0.9,
            (true, _) => 0.2,
            (false, 2) => 0.8,
            (false, _) => 0.1,
        }
    });
    let stripes = ImagePlane::from_fn(size, size, 3, |x, y, c| {
        let band = ((x + y) / 3) % 2 == 0;
        if band {
            [0.95, 0.85, 0.1][c]
        } else {
            [0.05, 0.3, 0.4][c]
        }
    });
    let mut rng = ChaCha8Rng::seed_from_u64(0x0cc1);
    let noise: Vec<f64> = (0..size * size * 3).map(|_| rng.random::<f64>()).collect();
    let noise = ImagePlane::new(size, size, 3, noise);
    [checker, stripes, noise]
        .into_iter()
        .map(|p| p.expect("builtin textures are valid"))
        .collect()
}

/// Loads every image in `dir` (sorted by name) as an occluder.
pub fn load_patches(dir: &Path) -> Result<Vec<ImagePlane>> {
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?;
    files.retain(|p| {
        p.is_file()
            && p.extension()
                .and_then(|e| e.to_str())
                .map(|e| crate::data::dataset::IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
                .unwrap_or(false)
    });
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidDataset(format!("no occluder images in {}", dir.display())));
    }
    files.iter().map(|f| read_image(f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(w: usize, h: usize) -> ImagePlane {
        ImagePlane::from_fn(w, h, 1, |_, _, _| 0.5).unwrap()
    }

    #[test]
    fn side_matches_square_formula() {
        assert_eq!(block_side(32, 32, 0.4), 20);
        for f in [0.2, 0.3, 0.5, 0.6] {
            assert_eq!(block_side(32, 32, f), (32.0 * f64::sqrt(f)).round() as usize);
        }
    }

    #[test]
    fn full_cover_replaces_everything() {
        let patch = ImagePlane::from_fn(4, 4, 1, |_, _, _| 0.0).unwrap();
        let (out, block) = occlude(&gray(10, 10), 0.95, 3, &patch).unwrap();
        assert_eq!(block.side, 10);
        assert!(out.pixels().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn same_seed_same_block() {
        let patches = builtin_patches();
        let img = gray(24, 30);
        let a = occlude(&img, 0.3, 11, &patches[1]).unwrap();
        let b = occlude(&img, 0.3, 11, &patches[1]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_out_of_range_fraction() {
        let patch = builtin_patches().remove(0);
        assert!(occlude(&gray(8, 8), 0.01, 0, &patch).is_err());
        assert!(occlude(&gray(8, 8), 0.99, 0, &patch).is_err());
    }
}

//! From a run configuration to train/test sample matrices.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{RunConfig, SourceSpec};
use crate::data::dataset::split_groups;
use crate::data::{
    builtin_patches, load_dataset, load_labeled, load_patches, occlude, plant_sparse_corruption, synth_multimodal,
    DatasetManifest, ImageDataset, LabeledDataset,
};
use crate::error::{Error, Result};
use crate::modality::{IlluminationInvariant, ImagePlane, ModalityTransform, RawPixels};

/// Mixes a base seed with a stream tag so derived generators do not
/// collide.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Near-square `(width, height)` with `width · height = d`, used to render
/// vectors that did not come from images.
pub fn display_geometry(d: usize) -> (usize, usize) {
    let mut h = (d as f64).sqrt().floor() as usize;
    while h > 1 && d % h != 0 {
        h -= 1;
    }
    let h = h.max(1);
    (d / h, h)
}

enum Loaded {
    Samples(LabeledDataset),
    Images {
        images: ImageDataset,
        /// Every image transformed once, columns in class order.
        clean: LabeledDataset,
        patches: Vec<ImagePlane>,
    },
}

/// A resolved data source, loaded once and split per repeat.
pub struct DataSource {
    loaded: Loaded,
    geometry: (usize, usize),
    invariant: IlluminationInvariant,
}

impl DataSource {
    pub fn open(cfg: &RunConfig) -> Result<Self> {
        let invariant = IlluminationInvariant { params: cfg.invariant };
        match &cfg.source {
            SourceSpec::Synthetic(spec) => {
                let ds = synth_multimodal(spec).map_err(|e| Error::InvalidConfig(e.to_string()))?;
                let labeled = LabeledDataset::new(ds.views.to_vec(), ds.labels, Vec::new())?;
                Ok(Self {
                    geometry: display_geometry(spec.dim),
                    loaded: Loaded::Samples(labeled),
                    invariant,
                })
            }
            SourceSpec::Dump { path } => {
                let labeled = load_labeled(path)?;
                let d = labeled.views.first().map_or(0, |v| v.nrows());
                Ok(Self {
                    geometry: display_geometry(d),
                    loaded: Loaded::Samples(labeled),
                    invariant,
                })
            }
            SourceSpec::Images { root, geometry } => {
                let manifest = DatasetManifest::scan(root, *geometry)?;
                let images = load_dataset(&manifest)?;
                let transforms: [&dyn ModalityTransform; 2] = [&RawPixels, &invariant];
                let clean = images.to_labeled(&transforms)?;
                let patches = match cfg.occlusion.as_ref().and_then(|o| o.patches.as_ref()) {
                    Some(dir) => load_patches(dir)?,
                    None => builtin_patches(),
                };
                Ok(Self {
                    geometry: (geometry.width, geometry.height),
                    loaded: Loaded::Images {
                        images,
                        clean,
                        patches,
                    },
                    invariant,
                })
            }
        }
    }

    /// `(width, height)` used to render sample vectors as images.
    pub fn geometry(&self) -> (usize, usize) {
        self.geometry
    }

    pub fn all(&self) -> &LabeledDataset {
        match &self.loaded {
            Loaded::Samples(ds) => ds,
            Loaded::Images { clean, .. } => clean,
        }
    }

    /// Train/test split of repeat `repeat`, seeded with `seed + repeat`.
    ///
    /// Training samples are then corrupted: `±1` spikes on sample matrices
    /// when `train_corruption > 0`, block occlusion on images when an
    /// occlusion spec is present. Test samples stay clean.
    pub fn prepare(&self, cfg: &RunConfig, repeat: usize) -> Result<(LabeledDataset, LabeledDataset)> {
        let seed = cfg.seed.wrapping_add(repeat as u64);
        let all = self.all();
        let mut groups = vec![Vec::new(); all.class_count()];
        for (i, &l) in all.labels.iter().enumerate() {
            groups[l].push(i);
        }
        let (train_idx, test_idx) = split_groups(&groups, cfg.split.train_per_class, seed).map_err(|e| match e {
            Error::InvalidDataset(msg) => Error::InvalidDataset(format!("{msg} (class names: {})", all.class_names.join(", "))),
            other => other,
        })?;
        let test = all.select(&test_idx)?;
        let mut train = all.select(&train_idx)?;

        match &self.loaded {
            Loaded::Samples(_) => {
                if cfg.split.train_corruption > 0.0 {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
                    for v in train.views.iter_mut() {
                        plant_sparse_corruption(v, cfg.split.train_corruption, &mut rng)?;
                    }
                }
            }
            Loaded::Images { images, patches, .. } => {
                if let Some(occ) = &cfg.occlusion {
                    let flat: Vec<&ImagePlane> = images.images.iter().flatten().collect();
                    let transforms: [&dyn ModalityTransform; 2] = [&RawPixels, &self.invariant];
                    let columns = train_idx
                        .par_iter()
                        .map(|&i| {
                            let patch = &patches[i % patches.len()];
                            let (img, _) = occlude(flat[i], occ.fraction, derive_seed(seed, 2 + i as u64), patch)?;
                            transforms.iter().map(|t| t.apply(&img)).collect::<Result<Vec<DVector<f64>>>>()
                        })
                        .collect::<Result<Vec<_>>>()?;
                    let views = (0..2)
                        .map(|k| DMatrix::from_columns(&columns.iter().map(|c| c[k].clone()).collect::<Vec<_>>()))
                        .collect();
                    let labels = train_idx.iter().map(|&i| all.labels[i]).collect();
                    train = LabeledDataset::new(views, labels, all.class_names.clone())?;
                }
            }
        }
        Ok((train, test))
    }
}

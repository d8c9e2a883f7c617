//! Image folders, labeled sample matrices and seeded per-class splits.

use std::path::{Path, PathBuf};

use image::{DynamicImage, GenericImageView};
use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::modality::{ImagePlane, ModalityTransform};

/// File extensions picked up when scanning class directories.
pub const IMAGE_EXTENSIONS: [&str; 6] = ["png", "jpg", "jpeg", "pgm", "ppm", "pnm"];

/// Geometry applied to every decoded image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub width: usize,
    pub height: usize,
    /// Central `(width, height)` crop taken before resizing.
    #[serde(default)]
    pub crop: Option<(usize, usize)>,
}

impl Geometry {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            crop: None,
        }
    }

    pub fn with_crop(mut self, width: usize, height: usize) -> Self {
        self.crop = Some((width, height));
        self
    }
}

impl Default for Geometry {
    fn default() -> Self {
        Self::new(32, 32)
    }
}

/// Listing of a `root/<class>/<image>` tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub root: PathBuf,
    /// Class name and its files, both in lexicographic order; the position
    /// is the class id.
    pub classes: Vec<(String, Vec<PathBuf>)>,
    pub geometry: Geometry,
    /// SHA-256 over the relative paths and sizes of every listed file.
    pub checksum: String,
}

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

impl DatasetManifest {
    /// Scans `root`: every subdirectory is a class, every image file in it a
    /// sample.
    pub fn scan(root: &Path, geometry: Geometry) -> Result<Self> {
        if !root.is_dir() {
            return Err(Error::MissingFile(root.to_path_buf()));
        }
        if geometry.width == 0 || geometry.height == 0 {
            return Err(Error::InvalidConfig("image geometry must be positive".into()));
        }
        let mut hasher = Sha256::new();
        let mut classes = Vec::new();
        for dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
            let name = dir
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| Error::InvalidDataset(format!("class directory {} is not valid UTF-8", dir.display())))?
                .to_string();
            let files: Vec<PathBuf> = sorted_entries(&dir)?
                .into_iter()
                .filter(|p| p.is_file() && is_image(p))
                .collect();
            if files.is_empty() {
                return Err(Error::InvalidDataset(format!("class '{name}' has no images")));
            }
            for f in &files {
                let rel = f.strip_prefix(root).unwrap_or(f);
                hasher.update(rel.to_string_lossy().as_bytes());
                hasher.update(std::fs::metadata(f)?.len().to_le_bytes());
            }
            classes.push((name, files));
        }
        if classes.is_empty() {
            return Err(Error::InvalidDataset(format!("no class directories under {}", root.display())));
        }
        Ok(Self {
            root: root.to_path_buf(),
            classes,
            geometry,
            checksum: hex::encode(hasher.finalize()),
        })
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }
}

/// Decoded images grouped by class id.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDataset {
    pub class_names: Vec<String>,
    pub images: Vec<Vec<ImagePlane>>,
}

impl ImageDataset {
    pub fn class_count(&self) -> usize {
        self.images.len()
    }

    pub fn len(&self) -> usize {
        self.images.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Applies one transform per modality, producing column-aligned views.
    pub fn to_labeled(&self, transforms: &[&dyn ModalityTransform]) -> Result<LabeledDataset> {
        let flat: Vec<(usize, &ImagePlane)> = self
            .images
            .iter()
            .enumerate()
            .flat_map(|(c, imgs)| imgs.iter().map(move |img| (c, img)))
            .collect();
        let labels: Vec<usize> = flat.iter().map(|(c, _)| *c).collect();
        let mut views = Vec::with_capacity(transforms.len());
        for t in transforms {
            let cols = flat
                .par_iter()
                .map(|(_, img)| t.apply(img))
                .collect::<Result<Vec<_>>>()?;
            let d = cols.first().map(|c| c.len()).unwrap_or(0);
            if cols.iter().any(|c| c.len() != d) {
                return Err(Error::InvalidDataset(format!(
                    "transform '{}' produced vectors of differing length",
                    t.name()
                )));
            }
            views.push(DMatrix::from_columns(&cols));
        }
        LabeledDataset::new(views, labels, self.class_names.clone())
    }
}

/// Converts a decoded image to a plane, keeping color only when present.
pub fn plane_from_image(img: &DynamicImage) -> Result<ImagePlane> {
    let (w, h) = img.dimensions();
    if img.color().has_color() {
        let rgb = img.to_rgb32f();
        let pixels = rgb.into_raw().into_iter().map(|v| f64::from(v).clamp(0.0, 1.0)).collect();
        ImagePlane::new(w as usize, h as usize, 3, pixels)
    } else {
        let luma = img.to_luma32f();
        let pixels = luma.into_raw().into_iter().map(|v| f64::from(v).clamp(0.0, 1.0)).collect();
        ImagePlane::new(w as usize, h as usize, 1, pixels)
    }
}

/// Decodes one file into a plane without resizing.
pub fn read_image(path: &Path) -> Result<ImagePlane> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let img = image::open(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    plane_from_image(&img)
}

fn central_crop(img: &ImagePlane, width: usize, height: usize) -> Result<ImagePlane> {
    let w = width.min(img.width());
    let h = height.min(img.height());
    let x0 = (img.width() - w) / 2;
    let y0 = (img.height() - h) / 2;
    ImagePlane::from_fn(w, h, img.channels(), |x, y, c| img.get(x0 + x, y0 + y, c))
}

/// Decodes a file and applies the crop and bilinear resize of `geometry`.
pub fn load_image(path: &Path, geometry: &Geometry) -> Result<ImagePlane> {
    let mut img = read_image(path)?;
    if let Some((cw, ch)) = geometry.crop {
        img = central_crop(&img, cw, ch)?;
    }
    img.resize(geometry.width, geometry.height)
}

/// Decodes every listed file, in parallel per file.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<ImageDataset> {
    let images = manifest
        .classes
        .iter()
        .map(|(_, files)| {
            files
                .par_iter()
                .map(|f| load_image(f, &manifest.geometry))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ImageDataset {
        class_names: manifest.class_names(),
        images,
    })
}

/// Column-aligned sample matrices, one per modality, sorted by class.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub views: Vec<DMatrix<f64>>,
    pub labels: Vec<usize>,
    pub per_class_counts: Vec<usize>,
    pub class_names: Vec<String>,
}

impl LabeledDataset {
    /// Sorts the columns stably by label and records the class sizes.
    ///
    /// Labels must lie in `0..class_names.len()`; an empty `class_names`
    /// is filled with `class_<id>` up to the largest label.
    pub fn new(views: Vec<DMatrix<f64>>, labels: Vec<usize>, class_names: Vec<String>) -> Result<Self> {
        let n = labels.len();
        if let Some((k, v)) = views.iter().enumerate().find(|(_, v)| v.ncols() != n) {
            return Err(Error::InvalidInput(format!(
                "modality {} has {} columns but there are {n} labels",
                k + 1,
                v.ncols()
            )));
        }
        let classes = if class_names.is_empty() {
            labels.iter().max().map(|m| m + 1).unwrap_or(0)
        } else {
            class_names.len()
        };
        if let Some(l) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::InvalidInput(format!("label {l} exceeds the {classes} classes")));
        }
        let class_names = if class_names.is_empty() {
            (0..classes).map(|c| format!("class_{c}")).collect()
        } else {
            class_names
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| labels[i]);
        let views = views.iter().map(|v| v.select_columns(&order)).collect();
        let labels: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
        let mut per_class_counts = vec![0; classes];
        for &l in &labels {
            per_class_counts[l] += 1;
        }
        Ok(Self {
            views,
            labels,
            per_class_counts,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.per_class_counts.len()
    }

    /// Subset by column indices; the result is re-sorted by class.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(
            self.views.iter().map(|v| v.select_columns(indices)).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.class_names.clone(),
        )
    }

    pub fn view_refs(&self) -> Vec<&DMatrix<f64>> {
        self.views.iter().collect()
    }
}

/// Seeded per-class split of grouped indices.
///
/// `groups[c]` lists the indices of class `c`. Returns `(train, test)`
/// index lists, each grouped by class and ascending within a class.
pub fn split_groups(groups: &[Vec<usize>], train_per_class: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, members) in groups.iter().enumerate() {
        if members.len() <= train_per_class {
            return Err(Error::InvalidDataset(format!(
                "class {c} has {} samples, needs more than {train_per_class}",
                members.len()
            )));
        }
        let mut chosen = vec![false; members.len()];
        for i in sample(&mut rng, members.len(), train_per_class).into_iter() {
            chosen[i] = true;
        }
        for (i, &m) in members.iter().enumerate() {
            if chosen[i] {
                train.push(m);
            } else {
                test.push(m);
            }
        }
    }
    Ok((train, test))
}

/// Seeded split of a labeled dataset into training and test parts.
pub fn split_train_test(ds: &LabeledDataset, train_per_class: usize, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    let mut groups = vec![Vec::new(); ds.class_count()];
    for (i, &l) in ds.labels.iter().enumerate() {
        groups[l].push(i);
    }
    let (train, test) = split_groups(&groups, train_per_class, seed).map_err(|e| match e {
        Error::InvalidDataset(msg) => Error::InvalidDataset(name_class(msg, &ds.class_names)),
        other => other,
    })?;
    Ok((ds.select(&train)?, ds.select(&test)?))
}

/// Seeded split of decoded images, keeping the per-class grouping.
pub fn split_images(ds: &ImageDataset, train_per_class: usize, seed: u64) -> Result<(ImageDataset, ImageDataset)> {
    let mut offset = 0;
    let groups: Vec<Vec<usize>> = ds
        .images
        .iter()
        .map(|imgs| {
            let g = (offset..offset + imgs.len()).collect();
            offset += imgs.len();
            g
        })
        .collect();
    let (train, test) = split_groups(&groups, train_per_class, seed).map_err(|e| match e {
        Error::InvalidDataset(msg) => Error::InvalidDataset(name_class(msg, &ds.class_names)),
        other => other,
    })?;
    let flat: Vec<(usize, &ImagePlane)> = ds
        .images
        .iter()
        .enumerate()
        .flat_map(|(c, imgs)| imgs.iter().map(move |img| (c, img)))
        .collect();
    let gather = |idx: &[usize]| {
        let mut images = vec![Vec::new(); ds.class_count()];
        for &i in idx {
            let (c, img) = flat[i];
            images[c].push(img.clone());
        }
        ImageDataset {
            class_names: ds.class_names.clone(),
            images,
        }
    };
    Ok((gather(&train), gather(&test)))
}

fn name_class(msg: String, names: &[String]) -> String {
    // "class <id> has ..." becomes "class '<name>' (id <id>) has ..."
    let id = msg
        .strip_prefix("class ")
        .and_then(|rest| rest.split_whitespace().next())
        .and_then(|s| s.parse::<usize>().ok());
    match id.and_then(|c| names.get(c).map(|n| (c, n))) {
        Some((c, n)) => msg.replacen(&format!("class {c}"), &format!("class '{n}' (id {c})"), 1),
        None => msg,
    }
}

//! Seeded two-modality union-of-subspaces data with planted sparse
//! corruption.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    /// Rank of every class subspace.
    pub rank: usize,
    /// Fraction of entries receiving a ±1 spike, in `[0, 0.5]`.
    pub corruption: f64,
    pub seed: u64,
    /// Weight of the fresh, modality-2-only coefficients.
    pub view_noise: f64,
    /// How far modality 2 pulls each class subspace toward its partner
    /// class, in `[0, 0.5]`. At `0.5` paired classes coincide in modality 2.
    pub modality2_overlap: f64,
    /// Ratio of the class-mean coefficient to the per-sample spread. Zero
    /// makes every class symmetric under `x → −x`, which no linear score
    /// can separate.
    pub coefficient_mean: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            classes: 5,
            per_class: 20,
            dim: 64,
            rank: 4,
            corruption: 0.0,
            seed: 0,
            view_noise: 0.3,
            modality2_overlap: 0.0,
            coefficient_mean: 2.0,
        }
    }
}

/// Generated data plus everything needed to check a recovery.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    /// Observed views, `d × n` each, columns sorted by class.
    pub views: [DMatrix<f64>; 2],
    /// Views before corruption.
    pub clean: [DMatrix<f64>; 2],
    pub labels: Vec<usize>,
    /// Orthonormal class bases per modality.
    pub bases: [Vec<DMatrix<f64>>; 2],
    /// Planted spikes per modality (`±1` where corrupted, else `0`).
    pub masks: [DMatrix<f64>; 2],
}

/// Partner class used for modality-2 overlap.
pub fn partner_class(c: usize, classes: usize) -> usize {
    let p = c ^ 1;
    if p < classes {
        p
    } else {
        c.saturating_sub(1)
    }
}

pub(crate) fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // column-major fill keeps the draw order explicit
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_vec(rows, cols, data)
}

pub(crate) fn orthonormal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let g = gaussian(rng, rows, cols);
    orthonormalize(g)
}

fn orthonormalize(m: DMatrix<f64>) -> DMatrix<f64> {
    let cols = m.ncols();
    let q = nalgebra::QR::new(m).q();
    q.columns(0, cols).into_owned()
}

/// Adds `±1` spikes on `round(fraction · entries)` distinct entries and
/// returns the spike matrix.
pub fn plant_sparse_corruption(x: &mut DMatrix<f64>, fraction: f64, rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    if !(0.0..=0.5).contains(&fraction) {
        return Err(Error::InvalidParameter(format!(
            "corruption fraction must lie in [0, 0.5], got {fraction}"
        )));
    }
    let total = x.len();
    let count = (fraction * total as f64).round() as usize;
    let mut mask = DMatrix::zeros(x.nrows(), x.ncols());
    for idx in sample(rng, total, count).into_iter() {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        mask[idx] = sign;
        x[idx] += sign;
    }
    Ok(mask)
}

/// Draws a two-modality dataset.
///
/// Class `c` owns a random orthonormal rank-`r` basis `B_c` in modality 1.
/// Modality 2 applies one fixed random rotation `T` to (optionally
/// overlapped) bases and mixes in fresh coefficients, so column `i` of both
/// views is the same sample under two linear transforms. Coefficients of
/// class `c` are Gaussian around a random class center, scaled so entries
/// have unit second moment on average.
pub fn synth_multimodal(spec: &SynthSpec) -> Result<SynthDataset> {
    let &SynthSpec {
        classes,
        per_class,
        dim,
        rank,
        corruption,
        seed,
        view_noise,
        modality2_overlap,
        coefficient_mean,
    } = spec;
    if classes == 0 || per_class == 0 {
        return Err(Error::InvalidParameter("need at least one class and one sample".into()));
    }
    if rank == 0 || rank >= dim {
        return Err(Error::InvalidParameter(format!(
            "subspace rank must satisfy 0 < r < d, got r={rank}, d={dim}"
        )));
    }
    if !(0.0..=0.5).contains(&modality2_overlap) {
        return Err(Error::InvalidParameter("modality2_overlap must lie in [0, 0.5]".into()));
    }
    if !(coefficient_mean >= 0.0) {
        return Err(Error::InvalidParameter("coefficient_mean must be non-negative".into()));
    }
    if !(0.0..=0.5).contains(&corruption) {
        return Err(Error::InvalidParameter(format!(
            "corruption fraction must lie in [0, 0.5], got {corruption}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bases1: Vec<DMatrix<f64>> = (0..classes).map(|_| orthonormal(&mut rng, dim, rank)).collect();
    let rotation = orthonormal(&mut rng, dim, dim);
    let bases2: Vec<DMatrix<f64>> = (0..classes)
        .map(|c| {
            let p = partner_class(c, classes);
            let mixed = &bases1[c] * (1.0 - modality2_overlap) + &bases1[p] * modality2_overlap;
            orthonormalize(&rotation * mixed)
        })
        .collect();

    let scale = (dim as f64 / rank as f64 / (1.0 + coefficient_mean * coefficient_mean)).sqrt();
    let n = classes * per_class;
    let mut clean1 = DMatrix::zeros(dim, n);
    let mut clean2 = DMatrix::zeros(dim, n);
    let mut labels = Vec::with_capacity(n);
    for c in 0..classes {
        let center = gaussian(&mut rng, rank, 1) * coefficient_mean;
        let mut shared = gaussian(&mut rng, rank, per_class);
        for mut col in shared.column_iter_mut() {
            col += &center;
        }
        let shared = shared * scale;
        let fresh = gaussian(&mut rng, rank, per_class) * scale;
        let block1 = &bases1[c] * &shared;
        let block2 = &bases2[c] * (&shared + fresh * view_noise);
        clean1.columns_mut(c * per_class, per_class).copy_from(&block1);
        clean2.columns_mut(c * per_class, per_class).copy_from(&block2);
        labels.extend(std::iter::repeat_n(c, per_class));
    }

    let mut x1 = clean1.clone();
    let mut x2 = clean2.clone();
    let mask1 = plant_sparse_corruption(&mut x1, corruption, &mut rng)?;
    let mask2 = plant_sparse_corruption(&mut x2, corruption, &mut rng)?;

    Ok(SynthDataset {
        views: [x1, x2],
        clean: [clean1, clean2],
        labels,
        bases: [bases1, bases2],
        masks: [mask1, mask2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_corruption_is_clean() {
        let ds = synth_multimodal(&SynthSpec::default()).unwrap();
        assert_eq!(ds.views[0], ds.clean[0]);
        assert_eq!(ds.views[1], ds.clean[1]);
        assert_eq!(ds.masks[0].amax(), 0.0);
    }

    #[test]
    fn seed_determines_everything() {
        let spec = SynthSpec {
            corruption: 0.1,
            seed: 42,
            ..Default::default()
        };
        let a = synth_multimodal(&spec).unwrap();
        let b = synth_multimodal(&spec).unwrap();
        assert_eq!(a.views[0], b.views[0]);
        assert_eq!(a.views[1], b.views[1]);
        assert_eq!(a.masks[1], b.masks[1]);
    }

    #[test]
    fn corruption_count_is_exact() {
        let spec = SynthSpec {
            corruption: 0.25,
            ..Default::default()
        };
        let ds = synth_multimodal(&spec).unwrap();
        let planted = ds.masks[0].iter().filter(|v| **v != 0.0).count();
        assert_eq!(planted, (0.25 * ds.masks[0].len() as f64).round() as usize);
        assert!((&ds.views[0] - &ds.clean[0] - &ds.masks[0]).amax() < 1e-12);
    }

    #[test]
    fn partners() {
        assert_eq!(partner_class(0, 5), 1);
        assert_eq!(partner_class(3, 5), 2);
        assert_eq!(partner_class(4, 5), 3);
        assert_eq!(partner_class(0, 1), 0);
    }

    #[test]
    fn rejects_bad_rank() {
        let spec = SynthSpec {
            rank: 64,
            ..Default::default()
        };
        assert!(synth_multimodal(&spec).is_err());
    }
}

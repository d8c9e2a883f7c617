use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Block-diagonal target code `Q`.
///
/// Column `i` is the ideal code of training sample `i`: it holds `p_L` on the
/// rows of class `L`'s sub-dictionary (where `L` is the sample's class and
/// `p_L` its training count) and zero elsewhere. Since every class owns as
/// many atoms as it has samples, `Q` is square and symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct IdealCode {
    q: DMatrix<f64>,
    per_class_counts: Vec<usize>,
}

/// Per-class run lengths of a label vector that must be sorted.
pub fn class_counts(labels: &[usize]) -> Result<Vec<usize>> {
    if labels.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput(
            "labels must be sorted by class; build the dataset through LabeledDataset::new".into(),
        ));
    }
    let classes = labels.last().map_or(0, |&l| l + 1);
    let mut counts = vec![0; classes];
    for &l in labels {
        counts[l] += 1;
    }
    Ok(counts)
}

impl IdealCode {
    pub fn build(labels: &[usize], atoms_per_class: &[usize]) -> Result<Self> {
        let mut counts = class_counts(labels)?;
        if counts.len() > atoms_per_class.len() {
            return Err(Error::InvalidConfig(format!(
                "labels reference {} classes but only {} have atoms",
                counts.len(),
                atoms_per_class.len()
            )));
        }
        counts.resize(atoms_per_class.len(), 0);
        if counts != atoms_per_class {
            return Err(Error::InvalidConfig(format!(
                "atoms per class {atoms_per_class:?} must equal training samples per class {counts:?}"
            )));
        }
        let n = labels.len();
        let mut q = DMatrix::zeros(n, n);
        let mut start = 0;
        for &p in &counts {
            q.view_mut((start, start), (p, p)).fill(p as f64);
            start += p;
        }
        Ok(Self {
            q,
            per_class_counts: counts,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn per_class_counts(&self) -> &[usize] {
        &self.per_class_counts
    }

    pub fn size(&self) -> usize {
        self.q.nrows()
    }
}

use std::ops::Range;

use nalgebra::{DMatrix, DMatrixView};

use crate::error::{Error, Result};

/// Column norm below which an atom is treated as vanished.
pub(crate) const ATOM_NORM_FLOOR: f64 = 1e-12;

/// Atom matrix `D` partitioned into contiguous per-class sub-dictionaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
    class_offsets: Vec<Range<usize>>,
}

impl Dictionary {
    /// Builds a dictionary from atoms and per-class atom counts.
    pub fn new(atoms: DMatrix<f64>, atoms_per_class: &[usize]) -> Result<Self> {
        let total: usize = atoms_per_class.iter().sum();
        if total != atoms.ncols() {
            return Err(Error::InvalidConfig(format!(
                "class atom counts sum to {total} but the dictionary has {} atoms",
                atoms.ncols()
            )));
        }
        if atoms.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("dictionary has non-finite atoms".into()));
        }
        let mut class_offsets = Vec::with_capacity(atoms_per_class.len());
        let mut start = 0;
        for &k in atoms_per_class {
            class_offsets.push(start..start + k);
            start += k;
        }
        Ok(Self {
            atoms,
            class_offsets,
        })
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn into_atoms(self) -> DMatrix<f64> {
        self.atoms
    }

    pub fn class_offsets(&self) -> &[Range<usize>] {
        &self.class_offsets
    }

    pub fn atoms_per_class(&self) -> Vec<usize> {
        self.class_offsets.iter().map(|r| r.len()).collect()
    }

    /// Total atom count 𝒞.
    pub fn atom_count(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn class_count(&self) -> usize {
        self.class_offsets.len()
    }

    pub fn sub_dictionary(&self, class: usize) -> DMatrixView<'_, f64> {
        let r = &self.class_offsets[class];
        self.atoms.columns(r.start, r.len())
    }

    /// Class owning atom `j`.
    pub fn class_of_atom(&self, j: usize) -> Option<usize> {
        self.class_offsets.iter().position(|r| r.contains(&j))
    }

    pub(crate) fn with_atoms(&self, atoms: DMatrix<f64>) -> Self {
        debug_assert_eq!(atoms.shape(), self.atoms.shape());
        Self {
            atoms,
            class_offsets: self.class_offsets.clone(),
        }
    }
}

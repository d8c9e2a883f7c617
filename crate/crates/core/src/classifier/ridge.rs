use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::slrdl::Dictionary;

/// Closed-form multivariate ridge classifier on sparse codes.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeClassifier {
    /// `C × 𝒞` weights `Ŵ`.
    pub w_hat: DMatrix<f64>,
    /// `C × n` one-hot label matrix used for the fit.
    pub h: DMatrix<f64>,
    pub lambda_ridge: f64,
    /// `C × 𝒞` class-indicator rows: row `c` is 1 on class `c`'s atoms.
    ///
    /// The ideal code `Q` is `𝒞 × 𝒞` and cannot be added to `Ŵ` directly;
    /// each row of `Q` inside class `c`'s block equals `p_c` times this
    /// indicator, so it stands in for `Q` in the score `(Ŵ + Q)z`.
    pub q_score: DMatrix<f64>,
}

/// `C × n` one-hot matrix with `H[labels[i], i] = 1`.
pub fn build_label_matrix(labels: &[usize], classes: usize) -> Result<DMatrix<f64>> {
    let mut h = DMatrix::zeros(classes, labels.len());
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::InvalidInput(format!(
                "label {l} at column {i} is outside 0..{classes}"
            )));
        }
        h[(l, i)] = 1.0;
    }
    Ok(h)
}

/// `Ŵ = H Zᵀ (Z Zᵀ + λI)⁻¹`.
pub fn fit_ridge(z: &DMatrix<f64>, h: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if z.ncols() != h.ncols() {
        return Err(Error::InvalidInput(format!(
            "codes have {} columns but the label matrix has {}",
            z.ncols(),
            h.ncols()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "ridge weight must be finite and non-negative, got {lambda}"
        )));
    }
    let c = z.nrows();
    let mut a = z * z.transpose();
    for i in 0..c {
        a[(i, i)] += lambda;
    }
    // a is symmetric, so Ŵᵀ = a⁻¹ Z Hᵀ
    let rhs = z * h.transpose();
    let chol = a.cholesky().ok_or_else(|| {
        Error::numerical(
            "fit_ridge",
            format!("Z Zᵀ + {lambda}·I is singular; use a positive ridge weight"),
        )
    })?;
    Ok(chol.solve(&rhs).transpose())
}

/// Class-indicator rows aligned with the dictionary's class blocks.
pub fn class_indicator(dict: &Dictionary) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(dict.class_count(), dict.atom_count());
    for (c, r) in dict.class_offsets().iter().enumerate() {
        q.view_mut((c, r.start), (1, r.len())).fill(1.0);
    }
    q
}

impl RidgeClassifier {
    pub fn fit(z: &DMatrix<f64>, labels: &[usize], dict: &Dictionary, lambda_ridge: f64) -> Result<Self> {
        if z.nrows() != dict.atom_count() {
            return Err(Error::InvalidInput(format!(
                "codes have {} rows but the dictionary has {} atoms",
                z.nrows(),
                dict.atom_count()
            )));
        }
        let h = build_label_matrix(labels, dict.class_count())?;
        let w_hat = fit_ridge(z, &h, lambda_ridge)?;
        Ok(Self {
            w_hat,
            h,
            lambda_ridge,
            q_score: class_indicator(dict),
        })
    }

    pub fn classes(&self) -> usize {
        self.w_hat.nrows()
    }

    /// `s = (Ŵ + Q_score) z`.
    pub fn scores(&self, z_ts: &DVector<f64>) -> Result<DVector<f64>> {
        if z_ts.len() != self.w_hat.ncols() {
            return Err(Error::InvalidInput(format!(
                "code has length {} but the classifier expects {}",
                z_ts.len(),
                self.w_hat.ncols()
            )));
        }
        Ok((&self.w_hat + &self.q_score) * z_ts)
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub(crate) fn argmax(v: &DVector<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Candidate label of one coded sample and its score vector.
pub fn candidate_label(ridge: &RidgeClassifier, z_ts: &DVector<f64>) -> Result<(usize, DVector<f64>)> {
    let s = ridge.scores(z_ts)?;
    Ok((argmax(&s), s))
}

//! Proximal and spectral primitives shared by every solver.
//!
//! All functions are pure. The SVD is faer's deterministic dense
//! decomposition and no randomized sketching is used, so equal inputs give
//! equal outputs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative floor below which a singular value counts as zero when
/// reporting rank.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Thin singular value decomposition `M = U·diag(S)·Vᵀ`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// `d × r`, orthonormal columns.
    pub u: DMatrix<f64>,
    /// Length `r`, non-negative and non-increasing.
    pub s: DVector<f64>,
    /// `n × r`, orthonormal columns.
    pub v: DMatrix<f64>,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= self.s[j];
        }
        us * self.v.transpose()
    }

    /// Numerical rank with the singular-value floor `RANK_TOLERANCE · S_max`.
    pub fn rank(&self) -> usize {
        self.rank_with(RANK_TOLERANCE)
    }

    pub fn rank_with(&self, rel_tol: f64) -> usize {
        let Some(&smax) = self.s.iter().next() else {
            return 0;
        };
        if smax <= 0.0 {
            return 0;
        }
        self.s.iter().filter(|&&s| s > rel_tol * smax).count()
    }
}

fn ensure_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{what} contains non-finite entries")))
    }
}

fn ensure_threshold(tau: f64) -> Result<()> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "threshold must be non-negative, got {tau}"
        )));
    }
    Ok(())
}

/// Entrywise shrinkage `sign(m)·max(|m| − τ, 0)`.
pub fn soft_threshold(m: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    ensure_threshold(tau)?;
    ensure_finite(m, "soft_threshold input")?;
    Ok(m.map(|v| shrink(v, tau)))
}

#[inline]
pub(crate) fn shrink(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// Thin SVD with `r = min(d, n)`.
pub fn thin_svd(m: &DMatrix<f64>) -> Result<SvdFactors> {
    ensure_finite(m, "thin_svd input")?;
    let (d, n) = m.shape();
    let r = d.min(n);
    if r == 0 {
        return Ok(SvdFactors {
            u: DMatrix::zeros(d, 0),
            s: DVector::zeros(0),
            v: DMatrix::zeros(n, 0),
        });
    }
    let a = faer::Mat::<f64>::from_fn(d, n, |i, j| m[(i, j)]);
    let svd = a
        .thin_svd()
        .map_err(|e| Error::numerical("svd", format!("{d}x{n} decomposition failed: {e:?}")))?;
    let (fu, fs, fv) = (svd.U(), svd.S().column_vector(), svd.V());
    let u = DMatrix::from_fn(d, r, |i, j| fu[(i, j)]);
    let s = DVector::from_fn(r, |j, _| fs[j].max(0.0));
    let v = DMatrix::from_fn(n, r, |i, j| fv[(i, j)]);
    Ok(SvdFactors { u, s, v })
}

/// Singular value thresholding, the proximal operator of `τ‖·‖_*`.
pub fn svt(m: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    ensure_threshold(tau)?;
    let f = thin_svd(m)?;
    let (d, n) = m.shape();
    let mut out = DMatrix::zeros(d, n);
    for j in 0..f.s.len() {
        let s = f.s[j] - tau;
        if s <= 0.0 {
            // singular values are sorted
            break;
        }
        out.ger(s, &f.u.column(j), &f.v.column(j), 1.0);
    }
    Ok(out)
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    if m.is_empty() {
        return Err(Error::InvalidInput("spectral norm of an empty matrix".into()));
    }
    let f = thin_svd(m)?;
    Ok(f.s[0])
}

/// Sum of singular values.
pub fn nuclear_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(thin_svd(m)?.s.sum())
}

/// Largest absolute entry, `0` for an empty matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Orthonormal basis of the column space, keeping singular values above
/// `rel_tol · S_max`.
pub fn column_space_basis(m: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let f = thin_svd(m)?;
    let r = f.rank_with(rel_tol);
    Ok(f.u.columns(0, r).into_owned())
}

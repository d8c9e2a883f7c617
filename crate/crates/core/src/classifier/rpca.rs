//! Robust PCA by the inexact augmented Lagrange multiplier method.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prox::{column_space_basis, max_abs, shrink, spectral_norm, svt};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RpcaParams {
    /// Sparse weight; `None` means `1/√max(d, p)`.
    pub lambda: Option<f64>,
    /// Primal stop: `‖X − L − S‖_F / ‖X‖_F` below this.
    pub tol: f64,
    /// Dual stop: `μ‖Sᵏ − Sᵏ⁻¹‖_F / ‖X‖_F` below this. Without it the
    /// loop can stop on a feasible point well short of the minimum.
    pub dual_tol: f64,
    /// Penalty growth factor per iteration.
    pub rho: f64,
    pub max_iters: usize,
}

impl Default for RpcaParams {
    fn default() -> Self {
        Self {
            lambda: None,
            tol: 1e-7,
            dual_tol: 1e-6,
            rho: 1.1,
            max_iters: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RpcaResult {
    pub low_rank: DMatrix<f64>,
    pub sparse: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Decomposes `X = L + S` minimizing `‖L‖_* + λ‖S‖₁`.
pub fn rpca(x: &DMatrix<f64>, params: &RpcaParams) -> Result<RpcaResult> {
    let (d, p) = x.shape();
    if p == 0 || d == 0 {
        return Err(Error::InvalidInput("robust PCA needs a non-empty block".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("robust PCA input has non-finite entries".into()));
    }
    let lambda = params.lambda.unwrap_or(1.0 / (d.max(p) as f64).sqrt());
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("rpca lambda must be positive, got {lambda}")));
    }
    let xnorm = x.norm();
    if xnorm == 0.0 {
        return Ok(RpcaResult {
            low_rank: DMatrix::zeros(d, p),
            sparse: DMatrix::zeros(d, p),
            iterations: 0,
            converged: true,
        });
    }

    let norm_two = spectral_norm(x)?;
    let norm_inf = max_abs(x) / lambda;
    let mut y = x / norm_two.max(norm_inf);
    let mut mu = 1.25 / norm_two;
    let mu_bar = mu * 1e7;
    let rho = params.rho;
    if !(rho > 1.0) {
        return Err(Error::InvalidParameter(format!("rpca rho must exceed 1, got {rho}")));
    }

    let mut l = DMatrix::zeros(d, p);
    let mut s = DMatrix::zeros(d, p);
    for it in 1..=params.max_iters {
        let inv = 1.0 / mu;
        let mut arg = x - &l;
        arg += &y * inv;
        let s_prev = std::mem::replace(&mut s, arg.map(|v| shrink(v, lambda * inv)));

        let mut arg = x - &s;
        arg += &y * inv;
        l = svt(&arg, inv)?;

        let gap = x - &l - &s;
        let dual = mu * (&s - &s_prev).norm() / xnorm;
        y += &gap * mu;
        mu = (mu * rho).min(mu_bar);
        if gap.norm() / xnorm < params.tol && dual < params.dual_tol {
            return Ok(RpcaResult {
                low_rank: l,
                sparse: s,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(RpcaResult {
        low_rank: l,
        sparse: s,
        iterations: params.max_iters,
        converged: false,
    })
}

/// Relative singular-value cut for the class basis.
pub const BASIS_RANK_TOLERANCE: f64 = 1e-8;

/// Low-rank model of one class's training block in one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassNoiseStats {
    /// `d × p_c` low-rank component.
    pub low_rank: DMatrix<f64>,
    /// Column mean of the sparse component.
    pub mean_noise: DVector<f64>,
    /// Orthonormal basis of the column space of `low_rank`.
    pub basis: DMatrix<f64>,
    pub converged: bool,
}

impl ClassNoiseStats {
    /// Fits the class model on a raw training block.
    ///
    /// A single column carries no redundancy to split, so it is taken as
    /// its own low-rank part with zero noise.
    pub fn fit(block: &DMatrix<f64>, params: &RpcaParams) -> Result<Self> {
        let (low_rank, sparse, converged) = if block.ncols() == 1 {
            (block.clone(), DMatrix::zeros(block.nrows(), 1), true)
        } else {
            let r = rpca(block, params)?;
            (r.low_rank, r.sparse, r.converged)
        };
        let mean_noise = sparse.column_mean();
        let basis = column_space_basis(&low_rank, BASIS_RANK_TOLERANCE)?;
        Ok(Self {
            low_rank,
            mean_noise,
            basis,
            converged,
        })
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }
}

/// Squared distance from `x − S̄` to the class subspace:
/// `‖(I − BBᵀ)(x − S̄)‖²`.
pub fn reconstruction_error(x: &DVector<f64>, stats: &ClassNoiseStats) -> Result<f64> {
    if x.len() != stats.mean_noise.len() {
        return Err(Error::InvalidInput(format!(
            "sample has length {} but the class model has dimension {}",
            x.len(),
            stats.mean_noise.len()
        )));
    }
    let centered = x - &stats.mean_noise;
    if stats.basis.ncols() == 0 {
        return Ok(centered.norm_squared());
    }
    let coeffs = stats.basis.tr_mul(&centered);
    let residual = centered - &stats.basis * coeffs;
    Ok(residual.norm_squared())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_block() {
        let r = rpca(&DMatrix::zeros(4, 3), &RpcaParams::default()).unwrap();
        assert_eq!(r.low_rank, DMatrix::zeros(4, 3));
        assert_eq!(r.sparse, DMatrix::zeros(4, 3));
    }

    #[test]
    fn single_column_class_is_its_own_model() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, -4.0, 0.5]);
        let stats = ClassNoiseStats::fit(&x, &RpcaParams::default()).unwrap();
        assert_eq!(stats.low_rank, x);
        assert_eq!(stats.mean_noise, DVector::zeros(3));
        assert_eq!(stats.rank(), 1);
    }

    #[test]
    fn error_in_and_out_of_subspace() {
        let basis = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let stats = ClassNoiseStats {
            low_rank: basis.clone(),
            mean_noise: DVector::zeros(3),
            basis,
            converged: true,
        };
        let inside = DVector::from_vec(vec![2.5, 0.0, 0.0]);
        assert_eq!(reconstruction_error(&inside, &stats).unwrap(), 0.0);
        let outside = DVector::from_vec(vec![0.0, 3.0, 4.0]);
        assert!((reconstruction_error(&outside, &stats).unwrap() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn empty_basis_projects_to_zero_subspace() {
        let stats = ClassNoiseStats {
            low_rank: DMatrix::zeros(2, 2),
            mean_noise: DVector::from_vec(vec![1.0, 0.0]),
            basis: DMatrix::zeros(2, 0),
            converged: true,
        };
        let x = DVector::from_vec(vec![3.0, 2.0]);
        assert_eq!(reconstruction_error(&x, &stats).unwrap(), 8.0);
    }
}

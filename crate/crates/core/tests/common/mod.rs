//! Independent reference implementations used as test oracles.
//!
//! Nothing here calls into the crate's numerical code: the SVD is a plain
//! one-sided Jacobi iteration and the least-squares solver is conjugate
//! gradients on the normal operator applied matrix-free.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Singular triplets from one-sided Jacobi rotations.
pub struct JacobiSvd {
    /// `m × k` left vectors (columns may be zero for zero singular values).
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    /// `n × k` right vectors.
    pub v: DMatrix<f64>,
}

/// One-sided Jacobi SVD of `a`; works on the transpose when `a` is wide.
pub fn jacobi_svd(a: &DMatrix<f64>) -> JacobiSvd {
    if a.nrows() < a.ncols() {
        let t = jacobi_svd(&a.transpose());
        return JacobiSvd {
            u: t.v,
            s: t.s,
            v: t.u,
        };
    }
    let (m, n) = a.shape();
    let mut u: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[(i, j)]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    for _sweep in 0..100 {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let alpha = dot(&u[i], &u[i]);
                let beta = dot(&u[j], &u[j]);
                let gamma = dot(&u[i], &u[j]);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..m {
                    let (p, q) = (u[i][k], u[j][k]);
                    u[i][k] = c * p - s * q;
                    u[j][k] = s * p + c * q;
                }
                for k in 0..n {
                    let (p, q) = (v[i][k], v[j][k]);
                    v[i][k] = c * p - s * q;
                    v[j][k] = s * p + c * q;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let s: Vec<f64> = u.iter().map(|col| dot(col, col).sqrt()).collect();
    let um = DMatrix::from_fn(m, n, |r, c| if s[c] > 0.0 { u[c][r] / s[c] } else { 0.0 });
    let vm = DMatrix::from_fn(n, n, |r, c| v[c][r]);
    JacobiSvd { u: um, s, v: vm }
}

/// Reference singular value shrinkage `Σ max(σ − τ, 0) u vᵀ`.
pub fn svt_oracle(a: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let svd = jacobi_svd(a);
    let mut out = DMatrix::zeros(a.nrows(), a.ncols());
    for (k, &s) in svd.s.iter().enumerate() {
        let shrunk = s - tau;
        if shrunk > 0.0 {
            out += svd.u.column(k) * svd.v.column(k).transpose() * shrunk;
        }
    }
    out
}

pub fn spectral_norm_oracle(a: &DMatrix<f64>) -> f64 {
    jacobi_svd(a).s.into_iter().fold(0.0, f64::max)
}

pub fn nuclear_norm_oracle(a: &DMatrix<f64>) -> f64 {
    jacobi_svd(a).s.into_iter().sum()
}

/// Entrywise `sign(x)·max(|x| − τ, 0)`, written out by cases.
pub fn soft_oracle(a: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    a.map(|x| {
        if x > tau {
            x - tau
        } else if x < -tau {
            x + tau
        } else {
            0.0
        }
    })
}

/// Minimizes `‖H − WZ‖² + λ‖W‖²` row by row with conjugate gradients,
/// applying `v ↦ Z(Zᵀv) + λv` without forming `ZZᵀ`.
pub fn ridge_cg(z: &DMatrix<f64>, h: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let k = z.nrows();
    let apply = |v: &DVector<f64>| -> DVector<f64> { z * (z.transpose() * v) + v * lambda };
    let mut w = DMatrix::zeros(h.nrows(), k);
    for r in 0..h.nrows() {
        let b = z * h.row(r).transpose();
        let mut x = DVector::zeros(k);
        let mut res = b.clone();
        let mut p = res.clone();
        let mut rs = res.dot(&res);
        for _ in 0..10 * k + 100 {
            if rs.sqrt() <= 1e-14 * (1.0 + b.norm()) {
                break;
            }
            let ap = apply(&p);
            let step = rs / p.dot(&ap);
            x += &p * step;
            res -= &ap * step;
            let rs_new = res.dot(&res);
            p = &res + &p * (rs_new / rs);
            rs = rs_new;
        }
        w.row_mut(r).copy_from(&x.transpose());
    }
    w
}

/// Brute-force least-squares distance from `x` to the span of `basis`
/// columns, via Gram–Schmidt done here.
pub fn subspace_residual_oracle(x: &DVector<f64>, basis: &DMatrix<f64>) -> f64 {
    let mut q: Vec<DVector<f64>> = Vec::new();
    for c in basis.column_iter() {
        let mut v = c.into_owned();
        for _ in 0..2 {
            for e in &q {
                let proj = e.dot(&v);
                v -= e * proj;
            }
        }
        let n = v.norm();
        if n > 1e-10 {
            q.push(v / n);
        }
    }
    let mut r = x.clone();
    for _ in 0..2 {
        for e in &q {
            let proj = e.dot(&r);
            r -= e * proj;
        }
    }
    r.norm_squared()
}

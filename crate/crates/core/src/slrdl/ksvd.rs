//! KSVD per class, with orthogonal matching pursuit for the sparse codes.

use nalgebra::{DMatrix, DVector};

use super::dictionary::ATOM_NORM_FLOOR;
use super::Dictionary;
use crate::error::{Error, Result};
use crate::prox::thin_svd;

/// Greedy sparse code of `x` over the columns of `atoms`.
///
/// Each step picks the atom with the largest absolute correlation to the
/// residual and refits all active coefficients by least squares. Stops early
/// once the residual vanishes or no atom correlates with it.
pub fn omp_sparse_code(atoms: &DMatrix<f64>, x: &DVector<f64>, sparsity: usize) -> Result<DVector<f64>> {
    let c = atoms.ncols();
    if sparsity > c {
        return Err(Error::InvalidParameter(format!(
            "sparsity {sparsity} exceeds the atom count {c}"
        )));
    }
    if x.len() != atoms.nrows() {
        return Err(Error::InvalidInput(format!(
            "sample has length {} but atoms have dimension {}",
            x.len(),
            atoms.nrows()
        )));
    }
    let mut code = DVector::zeros(c);
    let xnorm = x.norm();
    if xnorm == 0.0 {
        return Ok(code);
    }
    let mut active: Vec<usize> = Vec::with_capacity(sparsity);
    let mut residual = x.clone();
    let mut coef = DVector::zeros(0);
    while active.len() < sparsity {
        if residual.norm() <= 1e-14 * xnorm {
            break;
        }
        let corr = atoms.tr_mul(&residual);
        let mut pick = None;
        let mut best = 0.0;
        for (j, v) in corr.iter().enumerate() {
            if !active.contains(&j) && v.abs() > best {
                best = v.abs();
                pick = Some(j);
            }
        }
        // zero-norm residual direction: nothing left to explain
        let Some(j) = pick.filter(|_| best > 1e-14 * xnorm) else {
            break;
        };
        active.push(j);
        let sub = atoms.select_columns(active.iter());
        coef = least_squares(&sub, x)?;
        residual = x - &sub * &coef;
    }
    for (k, &j) in active.iter().enumerate() {
        code[j] = coef[k];
    }
    Ok(code)
}

fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let f = thin_svd(a)?;
    let cutoff = f.s.max() * 1e-12;
    let mut out = DVector::zeros(a.ncols());
    for (j, &sj) in f.s.iter().enumerate() {
        if sj > cutoff {
            out += f.v.column(j) * (f.u.column(j).dot(b) / sj);
        }
    }
    Ok(out)
}

/// KSVD configuration for dictionary initialization.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct KsvdParams {
    /// OMP sparsity; `None` means `min(10, 𝒞 / C)`.
    pub sparsity: Option<usize>,
    pub rounds: usize,
}

impl Default for KsvdParams {
    fn default() -> Self {
        Self {
            sparsity: None,
            rounds: 10,
        }
    }
}

/// Dictionary and per-round reconstruction error of one class.
#[derive(Debug, Clone)]
pub struct ClassKsvd {
    pub atoms: DMatrix<f64>,
    /// `‖X − DA‖²_F` after each round.
    pub error_trace: Vec<f64>,
}

/// Runs KSVD on one class block.
///
/// Atoms start as the first `k` normalized non-zero samples. The coding step
/// keeps a sample's previous code when OMP does not improve on it, so the
/// recorded error never increases. An atom no sample uses is replaced with
/// the worst-represented sample.
pub fn ksvd_class(x: &DMatrix<f64>, atoms: usize, sparsity: usize, rounds: usize) -> Result<ClassKsvd> {
    let (d, p) = x.shape();
    if p == 0 {
        return Err(Error::InvalidInput("class has no samples".into()));
    }
    if atoms == 0 || atoms > p {
        return Err(Error::InvalidParameter(format!(
            "atoms per class must be in 1..={p}, got {atoms}"
        )));
    }
    if sparsity == 0 {
        return Err(Error::InvalidParameter("sparsity must be positive".into()));
    }
    let sparsity = sparsity.min(atoms);

    let mut dict = initial_atoms(x, atoms);
    let mut codes = DMatrix::<f64>::zeros(atoms, p);
    let mut trace = Vec::with_capacity(rounds);

    for _ in 0..rounds {
        // sparse coding
        for i in 0..p {
            let xi = x.column(i).into_owned();
            let fresh = omp_sparse_code(&dict, &xi, sparsity)?;
            let fresh_err = (&xi - &dict * &fresh).norm_squared();
            let old = codes.column(i).into_owned();
            let old_err = (&xi - &dict * &old).norm_squared();
            if fresh_err <= old_err {
                codes.set_column(i, &fresh);
            }
        }

        // atom refits
        for j in 0..atoms {
            let users: Vec<usize> = (0..p).filter(|&i| codes[(j, i)] != 0.0).collect();
            if users.is_empty() {
                let residual = x - &dict * &codes;
                let (worst, norm) = residual
                    .column_iter()
                    .map(|c| c.norm())
                    .enumerate()
                    .fold((0, 0.0), |acc, (i, n)| if n > acc.1 { (i, n) } else { acc });
                if norm > ATOM_NORM_FLOOR {
                    dict.set_column(j, &(residual.column(worst) / norm));
                }
                continue;
            }
            let sub_x = x.select_columns(users.iter());
            let sub_codes = codes.select_columns(users.iter());
            let mut err = sub_x - &dict * &sub_codes;
            err.ger(1.0, &dict.column(j), &sub_codes.row(j).transpose(), 1.0);
            let f = thin_svd(&err)?;
            if f.s[0] <= 0.0 {
                continue;
            }
            dict.set_column(j, &f.u.column(0));
            for (k, &i) in users.iter().enumerate() {
                codes[(j, i)] = f.s[0] * f.v[(k, 0)];
            }
        }
        trace.push((x - &dict * &codes).norm_squared());
    }

    debug_assert_eq!(dict.nrows(), d);
    Ok(ClassKsvd {
        atoms: dict,
        error_trace: trace,
    })
}

fn initial_atoms(x: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let d = x.nrows();
    let mut atoms = DMatrix::zeros(d, k);
    let mut filled = 0;
    for col in x.column_iter() {
        if filled == k {
            break;
        }
        let n = col.norm();
        if n > ATOM_NORM_FLOOR {
            atoms.set_column(filled, &(col / n));
            filled += 1;
        }
    }
    // all-zero samples leave slots open; fill with canonical directions
    let mut axis = 0;
    while filled < k {
        atoms[(axis % d, filled)] = 1.0;
        axis += 1;
        filled += 1;
    }
    atoms
}

/// Default OMP sparsity `min(10, 𝒞 / C)`, at least one.
pub fn default_sparsity(atoms_per_class: &[usize]) -> usize {
    let total: usize = atoms_per_class.iter().sum();
    let classes = atoms_per_class.len().max(1);
    (total / classes).clamp(1, 10)
}

/// Per-class KSVD, concatenated in class order.
pub fn ksvd_init(
    x_per_class: &[DMatrix<f64>],
    atoms_per_class: &[usize],
    sparsity: usize,
    rounds: usize,
) -> Result<Dictionary> {
    if x_per_class.len() != atoms_per_class.len() {
        return Err(Error::InvalidInput(format!(
            "{} class blocks but {} atom counts",
            x_per_class.len(),
            atoms_per_class.len()
        )));
    }
    let d = x_per_class.first().map_or(0, |b| b.nrows());
    let mut columns = Vec::new();
    for (c, (block, &k)) in x_per_class.iter().zip(atoms_per_class).enumerate() {
        if block.ncols() == 0 {
            return Err(Error::InvalidInput(format!("class {c} has no samples")));
        }
        if block.nrows() != d {
            return Err(Error::InvalidInput(format!("class {c} has inconsistent dimension")));
        }
        let fit = ksvd_class(block, k, sparsity, rounds)?;
        columns.extend(fit.atoms.column_iter().map(|col| col.into_owned()));
    }
    let atoms = if columns.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        DMatrix::from_columns(&columns)
    };
    Dictionary::new(atoms, atoms_per_class)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omp_picks_exact_atom() {
        let atoms = DMatrix::<f64>::identity(4, 4);
        let x = DVector::from_vec(vec![0.0, 0.0, 1.0, 0.0]);
        let code = omp_sparse_code(&atoms, &x, 2).unwrap();
        assert!((&code - &x).amax() < 1e-12, "{code}");
    }

    #[test]
    fn omp_zero_input() {
        let atoms = DMatrix::<f64>::identity(3, 3);
        let code = omp_sparse_code(&atoms, &DVector::zeros(3), 3).unwrap();
        assert_eq!(code, DVector::zeros(3));
    }

    #[test]
    fn omp_two_orthonormal_atoms() {
        let q = nalgebra::QR::new(DMatrix::from_fn(6, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0 + i as f64 * 0.1)).q();
        let x = q.column(0) * 2.0 + q.column(1) * 3.0;
        let code = omp_sparse_code(&q, &x, 2).unwrap();
        assert!((code[0] - 2.0).abs() < 1e-10);
        assert!((code[1] - 3.0).abs() < 1e-10);
        assert!(code[2].abs() < 1e-10 && code[3].abs() < 1e-10);
    }

    #[test]
    fn omp_rejects_excess_sparsity() {
        let atoms = DMatrix::<f64>::identity(3, 2);
        assert!(omp_sparse_code(&atoms, &DVector::zeros(3), 3).is_err());
    }

    #[test]
    fn rank_one_class_gives_the_direction() {
        let v = DVector::from_vec(vec![1.0, 2.0, -2.0]).normalize();
        let x = DMatrix::from_columns(&[&v * 2.0, &v * -0.5, &v * 3.0]);
        let fit = ksvd_class(&x, 2, 1, 5).unwrap();
        let a0 = fit.atoms.column(0);
        assert!((a0.dot(&v).abs() - 1.0).abs() < 1e-12, "{}", a0.dot(&v));
    }

    #[test]
    fn empty_class_is_rejected() {
        let err = ksvd_init(&[DMatrix::zeros(3, 0)], &[0], 1, 1).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn default_sparsity_rule() {
        assert_eq!(default_sparsity(&[20, 20]), 10);
        assert_eq!(default_sparsity(&[3, 3, 3]), 3);
    }
}

//! Linearized ADMM with adaptive penalty for one modality.
//!
//! The coding problem is
//!
//! ```text
//! min ‖Z‖_* + β‖W‖₁ + λ‖E‖₁ + α‖Z Z_lᵀ − Q‖²_F   s.t.  X = DZ + E,  W = Z
//! ```
//!
//! where `Z_l` is the other modality's latest code. Each iteration takes a
//! proximal-linear step on `Z`, exact shrinkage steps on `W` and `E`, then
//! dual ascent on `Y`, `M` and a geometric penalty increase. Once the codes
//! settle, the dictionary is refit in closed form with damping.

use nalgebra::DMatrix;

use super::{Dictionary, Hyperparams, IdealCode};
use crate::error::{Error, ResidualRecord, Result};
use crate::prox::{max_abs, soft_threshold, spectral_norm, svt, thin_svd};

/// Cross-modality coupling input for the `Z` step.
#[derive(Debug, Clone, Copy)]
pub struct Coupling<'a> {
    pub ideal: &'a IdealCode,
    /// Latest completed code of the other modality (`𝒞 × n`).
    pub partner: &'a DMatrix<f64>,
}

/// LADMAP iterate bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub z: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub mu: f64,
    /// Cached `‖D‖₂²`.
    pub eta: f64,
    pub iter: usize,
}

impl SolverState {
    /// All-zero iterate with `μ = μ₀` and `η = ‖D‖₂²`.
    pub fn new(dict: &Dictionary, x: &DMatrix<f64>, h: &Hyperparams) -> Result<Self> {
        let (d, n) = x.shape();
        if d != dict.dim() {
            return Err(Error::InvalidInput(format!(
                "data has dimension {d} but the dictionary atoms have {}",
                dict.dim()
            )));
        }
        let eta = spectral_norm(dict.atoms())?.powi(2);
        if !(eta > 0.0) {
            return Err(Error::InvalidInput("dictionary has zero spectral norm".into()));
        }
        let c = dict.atom_count();
        Ok(Self {
            z: DMatrix::zeros(c, n),
            w: DMatrix::zeros(c, n),
            e: DMatrix::zeros(d, n),
            y: DMatrix::zeros(d, n),
            m: DMatrix::zeros(c, n),
            mu: h.mu0,
            eta,
            iter: 0,
        })
    }

    /// `‖X − DZ − E‖_∞`.
    pub fn feasibility_residual(&self, dict: &Dictionary, x: &DMatrix<f64>) -> f64 {
        max_abs(&(x - dict.atoms() * &self.z - &self.e))
    }

    /// `‖Z − W‖_∞`.
    pub fn split_residual(&self) -> f64 {
        max_abs(&(&self.z - &self.w))
    }

    fn check_shapes(&self, dict: &Dictionary, x: &DMatrix<f64>) -> Result<()> {
        let (d, n) = x.shape();
        let c = dict.atom_count();
        let ok = dict.dim() == d
            && self.z.shape() == (c, n)
            && self.w.shape() == (c, n)
            && self.m.shape() == (c, n)
            && self.e.shape() == (d, n)
            && self.y.shape() == (d, n);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "solver state does not match data {d}x{n} with {c} atoms"
            )))
        }
    }

    fn ensure_positive_mu(&self) -> Result<()> {
        if self.mu > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidState(format!("penalty mu must be positive, got {}", self.mu)))
        }
    }
}

/// Proximal-linear step on `Z`.
///
/// The smooth part is linearized at `Zʲ` with gradient
/// `G = −μDᵀ(X − DZʲ − E + Y/μ) + μ(Zʲ − W + M/μ) + 2α(Zʲ Z_lᵀ − Q)Z_l`
/// and the step is `svt(Zʲ − G/τ, 1/τ)` with `τ = ημ`. When the coupling is
/// active, `τ` also carries the coupling term's Lipschitz constant
/// `2α‖Z_l‖₂²`, so the step stays bounded while `μ` is still tiny.
pub fn update_z(
    state: &SolverState,
    dict: &Dictionary,
    x: &DMatrix<f64>,
    coupling: Option<Coupling<'_>>,
    h: &Hyperparams,
) -> Result<DMatrix<f64>> {
    state.check_shapes(dict, x)?;
    state.ensure_positive_mu()?;
    let mu = state.mu;
    let d = dict.atoms();

    let mut residual = x - d * &state.z - &state.e;
    residual += &state.y * (1.0 / mu);
    let mut grad = d.tr_mul(&residual) * (-mu);
    grad += (&state.z - &state.w) * mu + &state.m;

    let mut tau = state.eta * mu;
    if h.alpha > 0.0 {
        let c = coupling.ok_or_else(|| {
            Error::InvalidInput("alpha > 0 requires the other modality's code".into())
        })?;
        let zl = c.partner;
        let q = c.ideal.matrix();
        if zl.shape() != state.z.shape() || q.shape() != (state.z.nrows(), state.z.nrows()) {
            return Err(Error::InvalidInput(format!(
                "coupling shapes: partner {:?}, ideal code {:?}, code {:?}",
                zl.shape(),
                q.shape(),
                state.z.shape()
            )));
        }
        let gap = &state.z * zl.transpose() - q;
        grad += (gap * zl) * (2.0 * h.alpha);
        tau += 2.0 * h.alpha * spectral_norm(zl)?.powi(2);
    }

    if grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(
            "update_z",
            format!(
                "non-finite gradient at iteration {} (mu={:.3e}, ‖Z‖_F={:.3e}, ‖E‖_F={:.3e}, ‖Y‖_F={:.3e}, ‖M‖_F={:.3e})",
                state.iter,
                mu,
                state.z.norm(),
                state.e.norm(),
                state.y.norm(),
                state.m.norm()
            ),
        ));
    }

    let arg = &state.z - grad / tau;
    svt(&arg, 1.0 / tau)
}

/// `W = soft(Z + M/μ, β/μ)`.
pub fn update_w(state: &SolverState, h: &Hyperparams) -> Result<DMatrix<f64>> {
    state.ensure_positive_mu()?;
    let mu = state.mu;
    let mut arg = state.z.clone();
    arg += &state.m * (1.0 / mu);
    soft_threshold(&arg, h.beta / mu)
}

/// `E = soft(Y/μ + X − DZ, λ/μ)`.
pub fn update_e(
    state: &SolverState,
    dict: &Dictionary,
    x: &DMatrix<f64>,
    h: &Hyperparams,
) -> Result<DMatrix<f64>> {
    state.check_shapes(dict, x)?;
    state.ensure_positive_mu()?;
    let mu = state.mu;
    let mut arg = x - dict.atoms() * &state.z;
    arg += &state.y * (1.0 / mu);
    soft_threshold(&arg, h.lambda / mu)
}

/// Dual ascent and penalty growth, in this order:
/// `Y += μ(X − DZ − E)`, `M += μ(Z − W)`, `μ = min(ρμ, μ_max)`.
pub fn update_multipliers_and_penalty(
    state: &mut SolverState,
    dict: &Dictionary,
    x: &DMatrix<f64>,
    h: &Hyperparams,
) -> Result<()> {
    state.check_shapes(dict, x)?;
    let mu = state.mu;
    let feas = x - dict.atoms() * &state.z - &state.e;
    state.y += &feas * mu;
    let split = &state.z - &state.w;
    state.m += &split * mu;
    state.mu = (h.rho * mu).min(h.mu_max);
    state.iter += 1;
    Ok(())
}

/// Both stopping residuals below `ε_s`.
pub fn coding_converged(
    state: &SolverState,
    dict: &Dictionary,
    x: &DMatrix<f64>,
    h: &Hyperparams,
) -> bool {
    state.feasibility_residual(dict, x) < h.eps_solver && state.split_residual() < h.eps_solver
}

/// Outcome of [`solve_coding`].
#[derive(Debug, Clone)]
pub struct CodingResult {
    pub state: SolverState,
    pub converged: bool,
    pub history: Vec<ResidualRecord>,
}

impl CodingResult {
    pub fn z(&self) -> &DMatrix<f64> {
        &self.state.z
    }

    pub fn e(&self) -> &DMatrix<f64> {
        &self.state.e
    }
}

/// Runs the LADMAP loop from the all-zero iterate until both residuals are
/// below `ε_s` or `max_inner_iters` is reached.
///
/// Hitting the cap is not an error: the iterate with the smallest residual
/// is returned with `converged = false`.
pub fn solve_coding(
    x: &DMatrix<f64>,
    dict: &Dictionary,
    coupling: Option<Coupling<'_>>,
    h: &Hyperparams,
) -> Result<CodingResult> {
    h.validate()?;
    if h.alpha > 0.0 && coupling.is_none() {
        return Err(Error::InvalidInput(
            "alpha > 0 requires the other modality's code".into(),
        ));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("data matrix has non-finite entries".into()));
    }
    let coupling = if h.alpha > 0.0 { coupling } else { None };

    let mut state = SolverState::new(dict, x, h)?;
    let mut history = Vec::new();
    let mut best: Option<(f64, SolverState)> = None;

    for _ in 0..h.max_inner_iters {
        let step = (|| -> Result<()> {
            state.z = update_z(&state, dict, x, coupling, h)?;
            state.w = update_w(&state, h)?;
            state.e = update_e(&state, dict, x, h)?;
            update_multipliers_and_penalty(&mut state, dict, x, h)
        })();
        if let Err(err) = step {
            return Err(err.with_history(history));
        }

        let feasibility = state.feasibility_residual(dict, x);
        let split = state.split_residual();
        history.push(ResidualRecord {
            iter: state.iter,
            feasibility,
            split,
            mu: state.mu,
        });
        if !(feasibility.is_finite() && split.is_finite()) {
            return Err(Error::numerical(
                "solve_coding",
                format!("non-finite iterate at iteration {}", state.iter),
            )
            .with_history(history));
        }
        if feasibility < h.eps_solver && split < h.eps_solver {
            return Ok(CodingResult {
                state,
                converged: true,
                history,
            });
        }
        let score = feasibility.max(split);
        if best.as_ref().map_or(true, |(s, _)| score < *s) {
            best = Some((score, state.clone()));
        }
    }

    let state = best.map_or(state, |(_, s)| s);
    Ok(CodingResult {
        state,
        converged: false,
        history,
    })
}

/// Damped closed-form dictionary step before atom renormalization:
/// `γD + (1 − γ)(Y/μ + X − E)Zᵀ(ZZᵀ)⁻¹`.
///
/// `ZZᵀ` receives a diagonal floor of `1e-10·tr(ZZᵀ)/𝒞` when its condition
/// number exceeds `1e12`.
pub fn damped_dictionary_step(
    dict: &Dictionary,
    state: &SolverState,
    x: &DMatrix<f64>,
    h: &Hyperparams,
) -> Result<DMatrix<f64>> {
    state.check_shapes(dict, x)?;
    state.ensure_positive_mu()?;
    if h.gamma == 1.0 {
        return Ok(dict.atoms().clone());
    }
    let c = dict.atom_count();
    let mut target = x - &state.e;
    target += &state.y * (1.0 / state.mu);

    let mut gram = &state.z * state.z.transpose();
    let s = thin_svd(&gram)?.s;
    let smax = s.max();
    let smin = s.min();
    if !(smax > 0.0) {
        return Err(Error::numerical(
            "update_dictionary",
            format!("codes vanish on every class block ({})", zero_blocks(dict, &state.z)),
        ));
    }
    if smin <= 0.0 || smax / smin > 1e12 {
        let floor = 1e-10 * gram.trace() / c as f64;
        for i in 0..c {
            gram[(i, i)] += floor;
        }
    }
    // gram is symmetric: D_update = target Zᵀ gram⁻¹ = (gram⁻¹ Z targetᵀ)ᵀ
    let rhs = &state.z * target.transpose();
    let chol = gram.cholesky().ok_or_else(|| {
        Error::numerical(
            "update_dictionary",
            format!("Z Zᵀ is singular beyond the regularization floor ({})", zero_blocks(dict, &state.z)),
        )
    })?;
    let update = chol.solve(&rhs).transpose();
    if update.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("update_dictionary", "non-finite dictionary update"));
    }
    Ok(dict.atoms() * h.gamma + update * (1.0 - h.gamma))
}

fn zero_blocks(dict: &Dictionary, z: &DMatrix<f64>) -> String {
    let empty: Vec<String> = dict
        .class_offsets()
        .iter()
        .enumerate()
        .filter(|(_, r)| z.rows(r.start, r.len()).norm() == 0.0)
        .map(|(c, _)| format!("class block {c}"))
        .collect();
    if empty.is_empty() {
        "no class block is entirely zero".into()
    } else {
        format!("zero code rows in {}", empty.join(", "))
    }
}

/// Damped dictionary update followed by unit-norm atom renormalization.
///
/// Rows of `Z` and `W` are rescaled inversely so `DZ` is unchanged. Atoms
/// whose updated norm vanishes keep their previous value.
pub fn update_dictionary(
    dict: &Dictionary,
    state: &mut SolverState,
    x: &DMatrix<f64>,
    h: &Hyperparams,
) -> Result<Dictionary> {
    if h.gamma == 1.0 {
        state.check_shapes(dict, x)?;
        return Ok(dict.clone());
    }
    let mut atoms = damped_dictionary_step(dict, state, x, h)?;
    for j in 0..atoms.ncols() {
        let norm = atoms.column(j).norm();
        if norm > super::dictionary::ATOM_NORM_FLOOR {
            atoms.column_mut(j).unscale_mut(norm);
            state.z.row_mut(j).scale_mut(norm);
            state.w.row_mut(j).scale_mut(norm);
        } else {
            atoms.set_column(j, &dict.atoms().column(j));
        }
    }
    Ok(dict.with_atoms(atoms))
}

/// `‖D_new − D_old‖_∞ < ε_d`.
pub fn dictionary_converged(new: &Dictionary, old: &Dictionary, h: &Hyperparams) -> bool {
    new.atoms().shape() == old.atoms().shape()
        && max_abs(&(new.atoms() - old.atoms())) < h.eps_dict
}

/// Result of the inner dictionary loop.
#[derive(Debug, Clone)]
pub struct DictionaryFit {
    pub dictionary: Dictionary,
    pub iterations: usize,
    pub converged: bool,
}

/// Repeats [`update_dictionary`] with the coding variables fixed until
/// [`dictionary_converged`] holds or `max_dict_iters` is reached.
pub fn fit_dictionary(
    dict: &Dictionary,
    state: &mut SolverState,
    x: &DMatrix<f64>,
    h: &Hyperparams,
) -> Result<DictionaryFit> {
    let mut current = dict.clone();
    for it in 1..=h.max_dict_iters {
        let next = update_dictionary(&current, state, x, h)?;
        let done = dictionary_converged(&next, &current, h);
        current = next;
        if done {
            return Ok(DictionaryFit {
                dictionary: current,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(DictionaryFit {
        dictionary: current,
        iterations: h.max_dict_iters,
        converged: false,
    })
}

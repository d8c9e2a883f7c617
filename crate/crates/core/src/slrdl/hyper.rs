use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Solver hyperparameters for one modality.
///
/// The penalty schedule and stopping tolerances default to the constants of
/// the reference algorithm; the iteration caps are artifact choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Weight of the cross-modality ideal-code term.
    pub alpha: f64,
    /// ℓ1 weight on the codes.
    pub beta: f64,
    /// ℓ1 weight on the sparse error.
    pub lambda: f64,
    /// Dictionary damping in `[0, 1]`; `1` freezes the dictionary.
    pub gamma: f64,
    pub mu0: f64,
    pub rho: f64,
    pub mu_max: f64,
    pub eps_solver: f64,
    pub eps_dict: f64,
    pub max_inner_iters: usize,
    pub max_dict_iters: usize,
    pub max_outer_alternations: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 0.5,
            lambda: 1.0,
            gamma: 0.5,
            mu0: 1e-6,
            rho: 1.1,
            mu_max: 1e30,
            eps_solver: 1e-8,
            eps_dict: 1e-5,
            max_inner_iters: 500,
            max_dict_iters: 20,
            max_outer_alternations: 10,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("lambda", self.lambda)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a finite non-negative number, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(self.rho > 1.0) {
            return bad(format!("rho must exceed 1, got {}", self.rho));
        }
        if !(self.mu0 > 0.0) || !(self.mu_max >= self.mu0) {
            return bad(format!(
                "need 0 < mu0 <= mu_max, got mu0={} mu_max={}",
                self.mu0, self.mu_max
            ));
        }
        if !(self.eps_solver > 0.0) || !(self.eps_dict > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.max_inner_iters == 0 || self.max_dict_iters == 0 || self.max_outer_alternations == 0
        {
            return bad("iteration caps must be positive".into());
        }
        Ok(())
    }

    /// Copy with the coupling term switched off, as used for coding.
    pub fn uncoupled(&self) -> Self {
        Self {
            alpha: 0.0,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let h = Hyperparams::default();
        h.validate().unwrap();
        assert_eq!(h.mu0, 1e-6);
        assert_eq!(h.rho, 1.1);
        assert_eq!(h.mu_max, 1e30);
        assert_eq!(h.eps_solver, 1e-8);
        assert_eq!(h.eps_dict, 1e-5);
    }

    #[test]
    fn rejects_out_of_range() {
        let mut h = Hyperparams { gamma: 1.5, ..Default::default() };
        assert!(h.validate().is_err());
        h.gamma = 0.5;
        h.rho = 1.0;
        assert!(h.validate().is_err());
        h.rho = 1.1;
        h.beta = -1.0;
        assert!(h.validate().is_err());
    }
}

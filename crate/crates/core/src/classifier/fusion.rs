use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::rpca::{reconstruction_error, ClassNoiseStats};
use crate::error::{Error, Result};

/// Outcome of the two-modality decision for one test sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionDecision {
    /// Candidate labels `(c₁, c₂)` from the two modalities.
    pub candidates: (usize, usize),
    /// `errors[k][j]`: reconstruction error of candidate `j` in modality `k`.
    /// `None` when the candidates agree and no residual was needed.
    pub errors: Option<[[f64; 2]; 2]>,
    /// Errors divided by their per-modality sum.
    pub normalized: Option<[[f64; 2]; 2]>,
    pub winner: usize,
}

impl FusionDecision {
    pub fn agreed(&self) -> bool {
        self.candidates.0 == self.candidates.1
    }
}

fn normalize_pair(e: [f64; 2]) -> [f64; 2] {
    let sum = e[0] + e[1];
    if sum > 0.0 && sum.is_finite() {
        [e[0] / sum, e[1] / sum]
    } else {
        [0.5, 0.5]
    }
}

/// Picks the winner among the two candidates from normalized errors.
///
/// Each modality's error pair is scaled to sum to one; the candidate with
/// the smaller total over modalities wins, ties going to the lower id.
pub fn decide(candidates: (usize, usize), errors: [[f64; 2]; 2]) -> FusionDecision {
    let (c1, c2) = candidates;
    if c1 == c2 {
        return FusionDecision {
            candidates,
            errors: None,
            normalized: None,
            winner: c1,
        };
    }
    let normalized = [normalize_pair(errors[0]), normalize_pair(errors[1])];
    let score = [
        normalized[0][0] + normalized[1][0],
        normalized[0][1] + normalized[1][1],
    ];
    let winner = if score[0] < score[1] {
        c1
    } else if score[1] < score[0] {
        c2
    } else {
        c1.min(c2)
    };
    FusionDecision {
        candidates,
        errors: Some(errors),
        normalized: Some(normalized),
        winner,
    }
}

/// Fuses the two candidate labels using per-class subspace residuals.
///
/// `x_ts[k]` is the sample in modality `k` and `stats[k][c]` the class
/// model of class `c` in modality `k`.
pub fn fuse(
    candidates: (usize, usize),
    x_ts: [&DVector<f64>; 2],
    stats: [&[ClassNoiseStats]; 2],
) -> Result<FusionDecision> {
    let (c1, c2) = candidates;
    if c1 == c2 {
        return Ok(decide(candidates, [[0.0; 2]; 2]));
    }
    let mut errors = [[0.0; 2]; 2];
    for k in 0..2 {
        for (j, &c) in [c1, c2].iter().enumerate() {
            let s = stats[k].get(c).ok_or_else(|| {
                Error::InvalidInput(format!("no class model for class {c} in modality {}", k + 1))
            })?;
            errors[k][j] = reconstruction_error(x_ts[k], s)?;
        }
    }
    Ok(decide(candidates, errors))
}

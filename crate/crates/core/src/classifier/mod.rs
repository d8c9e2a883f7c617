//! Ridge scoring, per-class robust low-rank models and the fused decision.

mod fusion;
mod ridge;
mod rpca;

pub use fusion::{decide, fuse, FusionDecision};
pub use ridge::{build_label_matrix, candidate_label, class_indicator, fit_ridge, RidgeClassifier};
pub use rpca::{reconstruction_error, rpca, ClassNoiseStats, RpcaParams, RpcaResult, BASIS_RANK_TOLERANCE};

//! Structured low-rank dictionary learning for a single modality.

mod dictionary;
mod hyper;
mod ideal;
mod ksvd;
mod solver;

pub use dictionary::Dictionary;
pub use hyper::Hyperparams;
pub use ideal::{class_counts, IdealCode};
pub use ksvd::{default_sparsity, ksvd_class, ksvd_init, omp_sparse_code, ClassKsvd, KsvdParams};
pub use solver::{
    coding_converged, damped_dictionary_step, dictionary_converged, fit_dictionary, solve_coding,
    update_dictionary, update_e, update_multipliers_and_penalty, update_w, update_z, CodingResult,
    Coupling, DictionaryFit, SolverState,
};

//! Multi-modal structured low-rank dictionary learning.
//!
//! Each modality learns a class-partitioned dictionary whose codes are
//! jointly low-rank and sparse, with a sparse error absorbing corruption.
//! A coupling term pulls the product of the two modalities' codes toward a
//! block-diagonal ideal code. Test samples are coded against the learned
//! dictionaries, scored by a ridge classifier, and the two modalities'
//! candidate labels are reconciled by per-class low-rank residuals.

pub mod classifier;
pub mod cli;
pub mod data;
pub mod error;
pub mod modality;
pub mod prox;
pub mod slrdl;
pub mod trainer;

pub use error::{Error, Result};

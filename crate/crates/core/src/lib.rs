//! Estimated transversality for approximately holomorphic sections of
//! ample line bundles over flat model tori.
//!
//! The crate builds Gaussian-localized sections of `E_k = C^{m+1} ⊗ L_k`,
//! measures their holomorphic jets against a small library of jet-space
//! strata (zero set, first-order Boardman strata, `Σ_{1,1}`), and drives a
//! net-and-batch perturbation sweep until the jets are uniformly transverse
//! with a certified margin. The pipeline module turns the result into
//! Donaldson hypersurfaces and Lefschetz pencils and cross-checks every
//! count with independent topological oracles.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bundle;
pub mod error;
pub mod geometry;
pub mod jets;
pub mod perturb;
pub mod pipeline;
pub mod sections;
pub mod strata;
pub mod transversality;

mod linalg;
mod taylor;
mod wirtinger;

pub use error::{Error, Result};
pub use num_complex::Complex64;

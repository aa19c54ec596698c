#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Worst-case SINR balancing for multicell MISO downlinks under norm-bounded
//! channel uncertainty.

// Links the system BLAS/LAPACK used by the PSD cone.
extern crate blas_src;
extern crate lapack_src;
extern crate openblas_src;

pub mod balancing;
pub mod baselines;
pub mod conic;
pub mod error;
pub mod experiments;
pub mod model;
pub mod par;
pub mod rng;
pub mod robust_sdp;
pub mod robust_socp;
pub mod uncertainty;

pub use error::{Error, Result};

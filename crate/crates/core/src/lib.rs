//! Numerical verification engine for the Tanno equation
//! `f_{,ijk} + c(2f_{,k}g_ij + f_{,i}g_jk + f_{,j}g_ik − f̄_{,i}J_jk − f̄_{,j}J_ik) = 0`
//! on pseudo-Kähler manifolds.
//!
//! Every derivative is exact: fields and metrics are evaluated on truncated
//! Taylor series ([`jet::Jet`]), and covariant derivatives are assembled from
//! those expansions. Finite differences appear only in the test oracles.

pub mod error;
pub mod extended_operator;
pub mod jet;
pub mod model_manifolds;
pub mod signature_analysis;
pub mod suite;
pub mod tanno_system;
pub mod tensor_calculus;

pub use error::{Error, Result};

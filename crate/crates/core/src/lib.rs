//! Codivergences between probability measures relative to a reference measure.
//!
//! A codivergence `D(P0 | P1, P2)` behaves like an inner product of the
//! directions `P1 - P0` and `P2 - P0` when both measures are close to `P0`.
//! This crate evaluates the covariance-type (`V_φ`) and correlation-type
//! (`R_φ`) codivergences exactly on finite discrete measures, provides
//! closed forms for common parametric families, assembles divergence
//! matrices and checks their structural properties (positive
//! semi-definiteness, rank identities, data-processing inequality, local
//! bilinear expansion) against independent numerical routes.
//!
//! Module map:
//!
//! - [`measures`]: discrete and signed measures, density ratios, Jordan
//!   decomposition and the perturbation radius `a_*`.
//! - [`codiv`]: `V_φ`, `R_φ`, χ² and Hellinger codivergences.
//! - [`closed_forms`]: `R_α` for parametric families and exponential families.
//! - [`matrices`]: divergence matrices, Markov kernels, rank and PSD diagnostics.
//! - [`local_geometry`]: the nonparametric Fisher inner product and
//!   expansion checks.
//! - [`oracle`]: quadrature / series / brute-force reference evaluations.

// Parameter checks are written `!(x > 0.0)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_forms;
pub mod codiv;
pub mod error;
pub mod extreal;
pub mod linalg;
pub mod local_geometry;
pub mod matrices;
pub mod measures;
pub mod oracle;
pub mod quadrature;
pub mod sampling;
pub mod summation;

pub use closed_forms::{gamma_first_order, r_alpha_closed, r_alpha_product, GenericExpFam, ParamFamily};
pub use codiv::{chi2_codiv, hellinger_codiv, r_alpha, r_phi, v_alpha, v_phi, PhiFunction};
pub use error::{Error, Result};
pub use extreal::ExtReal;
pub use matrices::{divergence_matrix, DivKind, DivMatrix, MarkovKernel};
pub use measures::{DiscreteMeasure, SignedMeasure};

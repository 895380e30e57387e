//! Spectral solver and experiment harness for the 1-D heat equation
//! `u_t + a(t) (-u_xx + q(x) u) = f` on `[0,T] x (0,1)` with Dirichlet
//! boundary conditions, where the potential `q`, the time coefficient `a`
//! and the data may be distributions.
//!
//! The operator's Dirichlet eigenpairs are computed by a modified Prufer
//! shooting method that stays well-defined for potentials `q = nu'` with
//! `nu` in L^2; the heat problem is then solved by eigenfunction expansion.
//! Distributional data is handled through mollified epsilon-families whose
//! moderateness, mutual consistency and convergence are measured by the
//! experiment drivers in [`vws`].

// `!(x > 0.0)` rejects NaN where `x <= 0.0` would accept it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index-based loops over matched matrix/grid indices read better in the
// stencil and Gram-matrix code.
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod estimates;
pub mod expr;
pub mod heat;
pub mod numerics;
pub mod regularization;
pub mod sturm_liouville;
pub mod vws;

pub use error::{Error, Result};
pub use numerics::{Grid, SampledFunction};

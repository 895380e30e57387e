//! Shared numerical kernels: uniform grids, quadrature, a fixed-step ODE
//! integrator and bracketed root finding.
//!
//! Everything here is a pure function of its inputs; values are immutable
//! after construction and safe to share across threads.

pub mod grid;
pub mod ivp;
pub mod quadrature;
pub mod rootfind;

pub use grid::{Grid, SampledFunction};
pub use ivp::{solve_ivp, Trajectory};
pub use quadrature::{cumulative, inner_product, integrate, l2_norm};
pub use rootfind::find_root;

//! Numerical laboratory for the `(p,q)`-parabolic equation `∂ₜu = Δ_p^q u`.
//!
//! - [`params`]: exponents, pointwise operators, range condition
//! - [`closed_forms`]: explicit barriers and the critical counterexample
//! - [`fd_solver`]: explicit planar and radial finite-difference solvers
//! - [`harnack`]: intrinsic cylinders, Harnack ratios, comparison audits
//! - [`constants`]: the explicit constant formulas and the Harnack chain
//! - [`scenario`], [`runner`], [`report`]: scenario files, orchestration and report output

// NaN-rejecting guards are written as `!(x > y)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(test)]
macro_rules! assert_rel {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        let scale = a.abs().max(b.abs()).max(1e-300);
        assert!((a - b).abs() <= $tol * scale, "{} vs {} (rel tol {})", a, b, $tol);
    }};
}

pub mod closed_forms;
pub mod constants;
pub mod error;
pub mod fd_solver;
pub mod harnack;
pub mod params;
pub mod report;
pub mod runner;
pub mod scenario;

pub use error::{LabError, Result};
pub use params::{Jet2, Params};

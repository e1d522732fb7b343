//! Numerical laboratory for Borell's stochastic-control representation of
//! `−log P_T e^{-f}(0)` and for abstract Prékopa–Leindler / Brascamp–Lieb
//! inequalities with finitely many functions and explicit block operators.

// Index loops mirror the formulas; `!(x >= 0)` style guards also reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod function;
pub mod harness;
pub mod heat;
pub mod linalg;
pub mod operator;
pub mod optimize;
pub mod report;
pub mod rng;

pub use error::{Error, Result};
pub use function::{GaussianMeasure, QuadratureSpec, ReferenceMeasure, TestFunction};

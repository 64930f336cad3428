//! Numerical laboratory for minimizers of convex variational integrals
//! `J(u) = ∫ F(∇u) dx` and the quantitative regularity estimates that govern them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod degiorgi;
pub mod error;
pub mod expr;
pub mod field;
pub mod hedgehog;
pub mod io;
pub mod lagrangian;
pub mod numdiff;
pub mod probe;
pub mod quad;
pub mod report;
pub mod solver;

pub use error::{Error, Result};
pub use expr::{parse, Expr};
pub use field::{Grid, Mask, NodeKind, ScalarField, VectorField};
pub use lagrangian::{DegeneracySet, EllipticityWindow, GradientRegion, Lagrangian, Profile};
pub use report::ProbeReport;
pub use solver::{minimize, ConvergenceReport, Method, SolveOptions};

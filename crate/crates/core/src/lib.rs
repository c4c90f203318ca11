//! Tikhonov regularization with structured and unstructured condition numbers.
//!
//! The crate solves `min ‖Ax − b‖² + λ²‖Lx‖²` through the GSVD of `(A, L)`
//! and computes the normwise, mixed and componentwise condition numbers of
//! the regularized solution `x_λ`, either exactly from the Fréchet derivative
//! or by estimation (power iterations and small-sample statistical condition
//! estimation).
//!
//! ```
//! use tikhcond_core::{testproblems, SolvedProblem, cond};
//!
//! let ex = testproblems::gen_example("toeplitz5").unwrap();
//! let solved = SolvedProblem::new(ex.problem(4.9988e-4).unwrap()).unwrap();
//! let report = cond::cond_unstructured(&solved).unwrap();
//! assert!((report.normwise / 4.4761e3 - 1.0).abs() < 5e-3);
//! ```

pub mod cond;
pub mod error;
pub mod experiment;
pub mod frechet;
pub mod golden;
pub mod gsvd;
pub mod power;
pub mod problem;
pub mod random;
pub mod sce;
pub mod structmat;
pub mod testproblems;

pub use cond::{ConditionReport, Method, StructureTag};
pub use error::{Result, TikhError};
pub use frechet::FrechetOperator;
pub use gsvd::{compute_gsvd, GsvdFactors};
pub use power::PowerOpts;
pub use problem::{solve_tikhonov, RegSolution, SolvedProblem, TikhonovProblem};
pub use sce::{SceOpts, SceReport, WallisMode};
pub use structmat::{
    canonical_basis, params_from_dense, LinearBasis, ParamPerturbation, StructureKind,
    StructuredMatrix,
};

pub use nalgebra::{DMatrix, DVector};

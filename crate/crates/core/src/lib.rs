//! Policy-gradient landscape certification for the linear quadratic
//! regulator, in continuous and discrete time.
//!
//! The crate evaluates `J(K)`, `∇J(K)` and the Lyapunov variable `X_K`
//! exactly, solves the Riccati equations for the optimum, and checks the
//! gradient-dominance inequality `μ_K (J(K) − J*) ≤ ‖∇J(K)‖²_F` together
//! with the two optimality-gap bounds it is built from. A lifted convex
//! reformulation `(K, X) ↦ ((K − K*)X, X)` is provided with its
//! feasibility tests, subgradient and Jacobian.

pub mod builtin;
pub mod convexreform;
pub mod dominance;
pub mod error;
pub mod lqr;
pub mod lyapunov;
pub mod matrixkit;
pub mod optimize;
pub mod riccati;
pub mod sampling;
pub mod systems;

pub use builtin::ExampleId;
pub use error::{LqrError, Result};
pub use lqr::PolicyEval;
pub use lyapunov::LyapunovCert;
pub use matrixkit::{Mat, Spectrum};
pub use riccati::RiccatiSolution;
pub use systems::{Gain, Plant, Stabilizing, StructureReport, TimeModel};

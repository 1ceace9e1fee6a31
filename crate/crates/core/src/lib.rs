//! Numerical toolkit for ground states of fractional Schrödinger equations
//! with sign-changing nonlinearities on a periodic box.
//!
//! The problem is
//! `(-Δ)^{α/2}u + V(x)u - μu/|x|^α = f(x,u) - K(x)|u|^{q-2}u`
//! with energy
//! `𝒥(u) = ½‖u‖² - ½μ∫u²/|x|^α - ∫F(x,u) + (1/q)∫K|u|^q`.
//! Ground states are computed by descent on the Nehari manifold
//! `𝒩 = {u ≠ 0 : 𝒥'(u)(u) = 0}`.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod functional;
pub mod grid;
pub mod inequalities;
pub mod nehari;
pub mod ngsf;
pub mod operators;

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use functional::{energy, gradient, EnergyReport, FiberingProfile, ProblemSpec};
pub use grid::{Field, Spectrum, TorusGrid};
pub use nehari::{minimize, project, GroundStateReport, ProjectionResult, SolverOptions};
pub use operators::{
    CoerciveGrowth, FractionalLaplacian, LocalizedPotential, NonlinearitySpec, PeriodicProfile, PotentialClass,
    PotentialSpec,
};

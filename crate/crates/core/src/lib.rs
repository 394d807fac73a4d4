//! Quantum geodesic flows on finite-dimensional noncommutative Riemannian geometries.
//!
//! The crate is layered bottom-up:
//!
//! * [`algebra`]: finite-dimensional *-algebras given by structure constants, states and twists.
//! * [`calculus`]: first-order calculi with a central basis of one-forms.
//! * [`geometry`]: bimodule connections, divergences, the * on vector fields, the kinetic
//!   and Ricci quadratic forms, metric compatibility and torsion.
//! * [`flows`]: the geodesic velocity and amplitude equations with a fixed-step RK4 integrator.
//! * [`models`]: the 2x2 matrix algebra and reduced fuzzy sphere geometries plus scenario presets.
//! * [`specfun`]: Jacobi elliptic functions.
//! * [`classical_oracle`]: finite-difference checks of the classical identities on charts.
//! * [`cli`]: the `qgeo` command line front end.

pub mod algebra;
pub mod calculus;
pub mod classical_oracle;
pub mod cli;
pub(crate) mod encoding;
pub mod error;
pub mod flows;
pub mod geometry;
pub mod linalg;
pub mod models;
pub mod report;
pub mod specfun;
pub mod tolerance;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Imaginary unit.
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

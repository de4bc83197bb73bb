//! Numerical laboratory for the singularly perturbed infinity-Laplacian
//! Dirichlet problem
//!
//! ```text
//!     Δ∞ u = ζ_ε(x, u)   in Ω,      u = φ on ∂Ω,
//!     ζ_ε(x, t) = β(t/ε)/ε + g(x),
//! ```
//!
//! together with the measurement tooling used to check the geometry of its
//! solutions as ε → 0 (Lipschitz bounds, linear growth, non-degeneracy,
//! Harnack ratios, density, porosity, Minkowski content) and a high accuracy
//! treatment of the one-dimensional profile.

pub mod barrier;
pub mod continuation;
pub mod csv;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod one_dim;
pub mod operator;
pub mod reaction;
pub mod selftest;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{Grid, ScalarField, Subdomain};
pub use operator::StencilOperator;
pub use reaction::{Bump, BumpKind, GProfile, ReactionTerm};

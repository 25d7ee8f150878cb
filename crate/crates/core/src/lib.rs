//! Numerical toolkit for sub-Riemannian area, prescribed mean curvature and
//! characteristic curves of intrinsic graphs in contact 3-manifolds.
//!
//! Everything lives in the Darboux chart `ω₀ = dt + x dy − y dx`; a manifold
//! is given by its horizontal metric in the frame `X = ∂x + y∂t`,
//! `Y = ∂y − x∂t`.

#![allow(clippy::needless_range_loop)]

pub mod banded;
pub mod curves;
pub mod expr;
pub mod geometry;
pub mod graph;
pub mod interp;
pub mod ode;
pub mod quadrature;
pub mod solver;
pub mod variation;

mod error;

pub use error::Error;

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Result<T, E = Error> = std::result::Result<T, E>;

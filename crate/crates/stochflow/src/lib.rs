//! Structure-preserving simulation of incompressible perfect fluids.
//!
//! Velocities are sparse, volume-weighted antisymmetric matrices supported on
//! face-adjacent cells; the time integrator is the trapezoidal discrete
//! Euler–Lagrange update solved by Newton's method.

pub mod mesh;
pub mod linalg;
pub mod fields;
pub mod calculus;
pub mod flat;
pub mod dynamics;
pub mod kelvin;
pub mod app;

/// The guide in `book/`, included here so its examples run as doctests.
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod chapter1 {}
    #[doc = include_str!("../../../book/src/meshes.md")]
    pub mod chapter2 {}
    #[doc = include_str!("../../../book/src/fields.md")]
    pub mod chapter3 {}
    #[doc = include_str!("../../../book/src/calculus.md")]
    pub mod chapter4 {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    pub mod chapter5 {}
    #[doc = include_str!("../../../book/src/kelvin.md")]
    pub mod chapter6 {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod chapter7 {}
}

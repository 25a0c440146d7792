//! Numerical verification toolkit for F-manifold structures.
//!
//! The crate checks, at machine precision on sampled points, the tensor
//! identities that define F-manifolds and their compatible (flat or non-flat)
//! connections; constructs the associated hierarchies of commuting
//! hydrodynamic flows; and builds Riemannian F-manifold structures for
//! dispersionless-KP (Benney) reductions from residue formulas.
//!
//! Everything works pointwise on a single chart. Derivatives come from exact
//! truncated jet arithmetic ([`jet`]), never from finite differences; finite
//! differences appear only inside tests as an independent cross-check.

// Index loops mirror the tensor index notation of the formulas they
// implement; iterator rewrites would obscure the correspondence.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::manual_is_multiple_of)]
#![allow(clippy::too_many_arguments)]
#![allow(clippy::type_complexity)]

pub mod algebra;
pub mod benney;
pub mod chart;
pub mod error;
pub mod expr;
pub mod fixtures;
pub mod flows;
pub mod geometry;
pub mod compat;
pub mod hierarchy;
pub mod jet;
pub mod linalg;
pub mod report;
pub mod residual;
pub mod series;
pub mod specfile;
pub mod tensor;

#[cfg(test)]
pub(crate) mod testsupport;

pub use error::{Error, Result};

//! Geometric nonlinear elasticity toolkit.
//!
//! The crate is organised bottom-up:
//!
//! - [`exterior`]: pointwise exterior algebra (wedge, Hodge star, musical
//!   isomorphisms, pullback, pairing of vector/covector-valued forms).
//! - [`frames`]: Cartan moving frames on rectangular chart grids, numerical
//!   exterior derivative, connection and curvature from the structure
//!   equations, flatness diagnostics.
//! - [`mesh`]: affine simplicial meshes, P1 geometry, OFF/TOFF input and
//!   legacy VTK output.
//! - [`kinematics`]: deformation 1-forms, Cauchy-Green tensor, compatibility
//!   residuals.
//! - [`constitutive`]: stored energies, first Piola-Kirchhoff stress as
//!   traction forms, consistent tangents.
//! - [`hw`]: the three-field Hu-Washizu functional, its residuals and the
//!   damped Newton solvers.
//! - [`verify`]: quick self-check suite used by the command line tool.
//!
//! Per-node and per-element work runs through [`par`], which uses rayon when
//! the `parallel` feature is enabled and plain iterators otherwise.

// `!(a > b)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the tensor notation.
#![allow(clippy::needless_range_loop)]

pub mod constitutive;
pub mod error;
pub mod exterior;
pub mod frames;
pub mod hw;
pub mod kinematics;
pub mod linalg;
pub mod mesh;
pub mod par;
pub mod verify;

pub use error::{Error, Result};

//! Petrov-Galerkin Raviart-Thomas mixed finite elements on curved domains.
//!
//! Trial fluxes satisfy the Neumann condition at feet of perpendiculars on
//! the true boundary, test fluxes on the fitted polygon.

pub mod analysis;
pub mod assembly;
pub mod cases;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod mesh;
pub mod spaces;
pub mod study;

pub use error::{Error, Result};

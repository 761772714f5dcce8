//! Reference-element machinery: quadrature, RT_k bases, Piola maps and the
//! discontinuous multiplier basis.

pub mod lagrange;
pub mod piola;
pub mod polynomial;
pub mod quadrature;
pub mod rt;

pub use lagrange::{pressure_basis, PressureBasis};
pub use piola::{piola_push, PhysicalElement, PiolaMap};
pub use quadrature::{gauss_edge_nodes, gauss_legendre, triangle_rule, QuadratureRule};
pub use rt::{rt_basis, RtLocalBasis};

//! Discrete Canham-Helfrich energies on closed genus-0 triangle meshes:
//! geometry, energies, exact gradients, constrained gradient flows and
//! numerical checks of the associated conservation laws.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bubbling;
pub mod conservation;
pub mod dual;
pub mod elres;
pub mod energy;
pub mod error;
pub mod generators;
pub mod geometry;
pub mod intersect;
pub mod io;
pub mod local;
pub mod mesh;
pub mod optimize;
pub mod remesh;
pub mod report;
pub mod sphere_family;
pub mod topology;
pub mod variations;

pub use energy::{energy, EnergyBreakdown, EnergyParams, VolumeConvention};
pub use error::{Error, Result};
pub use geometry::{vertex_geometry, VertexGeometry};
pub use mesh::{TriangleMesh, Vec3};
pub use variations::{DiscreteGradient, Functional};

//! Periodic-box discretization: grids, transforms, differential operators,
//! mode truncation and the Leray projector.

pub mod dealias;
mod field;
mod grid;
pub mod ops;

pub use field::{ScalarField, TensorField, VectorField};
pub use grid::{Grid, MIN_POINTS};
pub use ops::{
    divergence, galerkin_project, gradient, laplacian, leray_project, symmetrized_gradient,
    truncate_modes, velocity_gradient,
};

//! Truncated bosonic Fock spaces over discretized momentum grids.

pub mod basis;
pub mod grid;
pub mod ops;
pub mod vector;

pub use basis::{binomial, build_basis, OccupationBasis};
pub use grid::{
    diag_op, infrared_norm_sq, modified_dispersion, modified_dispersion_deriv, weighted_norm_omega,
    GridLayout, ModeGrid,
};
pub use ops::{
    annihilation_op, creation_op, dgamma, dgamma2, dgamma2_between, dgamma_diag, field_op, gamma,
    gamma_between, gamma_between_counted, number_op, soft_free_projector, Overflow,
};
pub use vector::FockVector;

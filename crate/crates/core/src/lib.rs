//! Numerical laboratory for a translation-invariant electron-boson model on
//! truncated Fock spaces: second-quantization algebra, fiber and full
//! Hamiltonians, dressed one-electron states, positive-commutator checks and
//! Krylov dynamics probes.

pub mod algebra;
pub mod cutoff;
pub mod dynamics;
pub mod eigen;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod model;
pub mod mourre;
pub mod sample;
pub mod sparse;
pub mod spectral;
pub mod split;
pub mod stats;

pub use error::{Error, Result};
pub use sparse::{SparseOperator, C64};

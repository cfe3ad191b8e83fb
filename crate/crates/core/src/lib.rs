//! Bogoliubov theory for dilute Bose gases on the unit torus, with exact
//! diagonalization and matrix-conjugation checks on truncated Fock spaces.

pub mod correlations;
pub mod eig;
pub mod error;
pub mod fit;
pub mod fock;
pub mod lattice;
pub mod linalg;
pub mod model;
pub mod pipeline;
pub mod predictor;
pub mod quad;
pub mod scattering;
pub mod sparse;
pub mod transforms;

pub use error::{Error, NumericalError, Result};

//! Classical toolkit for variational quantum eigensolver studies of small
//! molecules on a trapped-ion gate set.

pub mod ansatz;
pub mod basis;
pub mod circuit;
pub mod error;
pub mod estimator;
pub mod fermion;
pub mod optimizer;
pub mod pauli;
pub mod pipeline;
pub mod simulator;
pub mod surface;
pub mod table;
pub mod vqe;

pub use basis::BasisState;
pub use error::{Error, Result};
pub use pauli::{Axis, PauliString, PauliSum, Phase};

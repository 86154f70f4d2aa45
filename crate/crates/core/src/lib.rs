pub mod ensembles;
pub mod error;
pub mod cli;
pub mod indicators;
pub mod propagation;
pub mod reference;
pub mod svm;
pub mod systems;

pub use error::{Error, Result};

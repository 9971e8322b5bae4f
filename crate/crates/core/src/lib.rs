pub mod encodings;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod nn;
pub mod qnn;
pub mod qsim;
pub mod separability;
pub mod training;

pub use error::{Error, Result};

pub mod analyzer;
pub mod data;
pub mod error;
pub mod infoloss;
pub mod netspec;
pub mod optim;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};

pub mod error;
pub mod quad;
pub mod specfun;
pub mod kernels;
pub mod linop;
pub mod dpp;
pub mod pickrell;
pub mod cli;

pub use error::{Error, Result};

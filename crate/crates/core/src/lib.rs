pub mod analysis;
pub mod error;
pub mod io;
pub mod partition;
pub mod potential;
pub mod sim;

pub use error::{Error, Result};

pub mod cli;
pub mod cumulants;
pub mod error;
pub mod ito;
pub mod lab;
pub mod linalg;
pub mod partitions;
pub mod rational;
pub mod scalar;
pub mod series;
pub mod step;
pub mod transforms;

pub use error::{Error, Result};

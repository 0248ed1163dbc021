pub mod cli;
pub mod covariance;
pub mod document;
pub mod error;
pub mod fourier_check;
pub mod linalg;
pub mod matfun;
pub mod model;
pub mod quadrature;
pub mod random_model;
pub mod simulate;
pub mod special;
pub mod spectrum;
pub mod verify;

pub use error::{Error, Result};

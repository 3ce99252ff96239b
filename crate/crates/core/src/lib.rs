//! Day-ahead electricity market clearing with linear, nondiscriminatory prices.
pub mod cli;
pub mod cuts;
pub mod driver;
pub mod error;
pub mod io;
pub mod master;
pub mod model;
pub mod pricing;
pub mod qp;
pub mod relaxation;
pub mod verify;
pub use error::{Error, Result};

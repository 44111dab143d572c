pub mod cli;
pub mod control;
pub mod digitize;
pub mod error;
pub mod interp;
pub mod ode;
pub mod optimizer;
pub mod propagate;
pub mod robustness;
pub mod schedule;
pub mod specfun;

pub use error::{Error, Result};

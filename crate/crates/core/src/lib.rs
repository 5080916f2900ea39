pub mod analysis;
pub mod ap_solver;
pub mod error;
pub mod field;
pub mod hamiltonians;
pub mod hj_solver;
pub mod model;
pub mod roots;
pub mod setup;
mod stencil;

pub use error::{Error, Result};

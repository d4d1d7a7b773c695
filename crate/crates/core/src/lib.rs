pub mod angle;
pub mod cli;
pub mod conformal;
pub mod error;
pub mod functionals;
pub mod io;
pub mod lie;
pub mod solver;
pub mod stability;
pub mod torus;
pub mod verify;

pub use error::{Error, Result};

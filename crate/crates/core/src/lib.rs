pub mod asymptotics;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod manybody;
pub mod model;
pub mod real;
pub mod stability;
pub mod stationary;

pub use error::{Error, Result};

pub mod error;
pub mod linalg;
pub mod random;

pub use error::{Error, Result};
pub mod model;
pub mod channel;
pub mod trajectory;
pub mod stats;
pub mod noise;
pub mod cli;

pub mod cli;
pub mod ergodic;
pub mod error;
pub mod hjb;
pub mod landscape;
pub mod model;
pub mod numerics;
pub mod problem;
pub mod sde;
pub mod tunnel;
pub mod verify;

pub use error::{Error, Result};

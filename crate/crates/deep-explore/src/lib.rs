pub mod agent;
pub mod casestudy;
pub mod enn;
pub mod env;
pub mod error;
pub mod harness;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};

pub mod arith;
pub mod asymptotics;
pub mod cli;
pub mod dense;
pub mod edf;
pub mod error;
pub mod moments;
pub mod numeric;
pub mod primality;
pub mod sieve;

pub use error::{Error, Result};

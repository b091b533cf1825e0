//! Exact and simulated analysis of the hard-core model on complete `b`-ary
//! trees.

pub mod asymptotics;
pub mod bad_boundary;
pub mod coupling_star;
pub mod error;
pub mod exact_gibbs;
pub mod glauber;
pub mod model;
pub mod numfmt;
pub mod reconstruction;

pub use error::{Error, Result};

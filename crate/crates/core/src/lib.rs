//! Random boundary configurations over the Farey tree and their pleated realizations.

pub mod check;
pub mod config;
pub mod error;
pub mod grow;
pub mod h3measure;
pub mod pleat;
pub mod rng;
pub mod stats;
pub mod configdata;
pub mod dynamics;
pub mod cp1;
pub mod tree;

pub use error::{Error, Result};

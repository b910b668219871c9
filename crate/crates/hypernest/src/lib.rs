//! Hyperbolic geometry in the Lorentz model, nested-hyperboloid
//! dimensionality reduction, and a nested hyperbolic graph convolutional
//! network.

pub mod config;
pub mod data;
pub mod error;
pub mod group;
pub mod io;
pub mod lorentz;
pub mod gcn;
pub mod nested;
pub mod opt;
pub mod reduce;

pub use error::{Error, Result};

pub mod error;
pub mod exec;
pub mod fit;
pub mod geometry;
pub mod greens;
pub mod kernel;
pub mod lattice;
pub mod presets;
pub mod quadrature;
pub mod summation;
pub mod transport;

pub use error::{Error, Result};

//! Light-to-matter-wave state transfer in a double-Λ atomic beam: a direct
//! solver for the coupled envelope equations, the closed-form adiabatic
//! polariton solution, and the two-channel phase measurement.

pub mod adiabatic;
pub mod config;
pub mod error;
pub mod interferometry;
pub mod model;
pub mod pde;
pub mod plot;
pub mod quad;
pub mod run;
pub mod series;

pub use error::{Error, Result};

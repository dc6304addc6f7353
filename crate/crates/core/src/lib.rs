//! Discrete and continuous Langevin samplers for Boltzmann machines and
//! lattice models.
//!
//! The parameter ε used throughout is the update step of the discrete
//! Langevin rule; quantities such as λ_ε and σ_{m,ε} are evaluated at
//! `-1/sqrt(eps)`.

pub mod analysis;
pub mod error;
pub mod lattice;
pub mod langevin;
pub mod math;
pub mod network;
pub mod noise;
pub mod ou;
pub mod refractory;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

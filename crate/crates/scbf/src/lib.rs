//! Pathwise simulation of the 2D stochastic convective Brinkman-Forchheimer
//! equations with additive noise on nested channel domains.

pub mod error;
pub mod grid;

pub use error::{Error, Result};
pub mod operators;
pub mod noise;
pub mod rds;
pub mod solver;
pub mod attractor;
pub mod measure;
pub mod config;
pub mod checks;

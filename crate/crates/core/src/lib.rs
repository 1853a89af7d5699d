//! Exterior power biduals over finite chain rings and their group rings, a
//! synthetic Selmer-structure model, and the Euler -> Kolyvagin -> Stark
//! system pipeline built on top of it.

pub mod bidual;
pub mod cli;
pub mod combo;
pub mod euler;
pub mod kolyvagin;
pub mod module;
pub mod report;
pub mod ring;
pub mod selmer;
pub mod stark;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("ill-defined map: {0}")]
    IllDefined(String),
    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),
}

pub use module::{FPModule, Ideal, ModuleMap};
pub use ring::{Ring, RingSpec, Span, Zq};

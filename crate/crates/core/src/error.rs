//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by mesh generation, assembly, solvers, and data handling.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh: {0}")]
    Mesh(String),
    #[error("electrode layout: {0}")]
    Layout(String),
    #[error("test sets: {0}")]
    TestSets(String),
    #[error("conductivity: {0}")]
    Conductivity(String),
    #[error("current basis: {0}")]
    Basis(String),
    #[error("fem: {0}")]
    Fem(String),
    #[error("linear solver: {0}")]
    Solver(String),
    #[error("phantom: {0}")]
    Phantom(String),
    #[error("reconstruction config: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("parse: {0}")]
    Parse(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

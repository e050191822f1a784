//! Core library: turn matrix-product unitaries (MPUs) into explicit quantum
//! circuits by capping tensor segments into isometries and merging them in a
//! tree with deterministic (amplified) linear combinations of unitaries, then
//! certify the result by exact desk-scale simulation.

pub mod error;
pub mod linalg;
pub mod sampling;

pub mod amplification;
pub mod circuit;
pub mod compiler;
pub mod corpus;
pub mod isometry;
pub mod jacobi;
pub mod lcu;
pub mod mpu;
pub mod suite;

#[cfg(test)]
mod circuit_tests;
#[cfg(test)]
mod corpus_tests;
#[cfg(test)]
mod isometry_tests;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};

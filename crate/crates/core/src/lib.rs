//! Numerical toolkit for branching quantum states.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`]: dense complex matrices, Hermitian Jacobi eigensolver, SVD.
//! * [`schmidt`]: bipartite states, reduced density matrices, the Schmidt
//!   (bi-orthogonal) basis and the measurement-like correlating interaction.
//! * [`branching`]: branch trees with Born weights, the branch-counting
//!   measure and per-branch entropy bookkeeping.
//! * [`fhg`]: the relative-frequency operator on N-fold product states,
//!   computed three independent ways, plus Born vs. counting tables.
//! * [`anthropic`]: Monte Carlo and log-magnitude scenario engines.
//! * [`cli`]: config validation and report generation behind the `mwi` binary.

pub mod anthropic;
pub mod branching;
pub mod cli;
pub mod error;
pub mod fhg;
pub mod linalg;
pub mod rng;
pub mod schmidt;

pub use error::{Error, Result};
pub use linalg::{Complex, ComplexMatrix};

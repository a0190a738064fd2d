//! Finite-horizon reachability control for probabilistic Boolean control
//! networks (PBCNs).
//!
//! The crate trains time-dependent control policies with tabular Q-learning
//! over time-augmented states `(x, t)`, in a dense layout or a sparse
//! grow-on-visit layout, optionally warm-started from a table trained for a
//! shorter horizon. An exact backward-induction oracle and Monte-Carlo
//! policy evaluation check the learned policies.

pub mod env;
pub mod error;
pub mod eval;
pub mod horizon;
pub mod learner;
pub mod model;
pub mod qstore;
pub mod rng;

pub use error::{Error, Result};

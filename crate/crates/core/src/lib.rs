//! Round-synchronous simulation of distributed stochastic finite-sum
//! optimization over unbalanced directed networks.
//!
//! The crate couples four pieces:
//!
//! * [`netgraph`] — strongly connected digraphs, column-stochastic weights,
//!   and the spectral quantities (Perron vector, `sigma_a`, weighted norms)
//!   the rest of the crate consumes;
//! * [`objective`] — finite-sum objectives with component-level gradient
//!   access: regularized logistic regression, smoothed-hinge SVM, and a
//!   synthetic quadratic with a closed-form minimizer;
//! * [`solver`] — the round-synchronous multi-agent algorithms behind one
//!   runner: the loopless variance-reduced method with uncoordinated
//!   trigger probabilities, plus the S-ADDOPT, ADD-OPT, and Push-SAGA
//!   baselines;
//! * [`theory`] — the convergence-analysis constants, the 4x4 error-system
//!   matrix, the admissible step-size bound, and the weighted-norm
//!   certificate for its spectral radius.
//!
//! [`harness`] supplies reference solutions, metrics, traces, and the two
//! machine-learning case studies; [`cli`] exposes everything through a
//! single executable driven by plain-text config files.

pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod netgraph;
pub mod objective;
pub mod rng;
pub mod solver;
pub mod theory;

pub use error::{CoreError, Result};

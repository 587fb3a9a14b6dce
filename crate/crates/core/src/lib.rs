//! Gaussian mixture modeling of Bayesian network nodes over maximal
//! parental cliques.
//!
//! Each node of a directed acyclic graph is modeled as a Gaussian mixture
//! with one branch per maximal parental clique (MPC): a maximal set of the
//! node's parents that is a clique in the skeleton. Training alternates a
//! closed-form EM update of the mixture coefficients with mini-batch Adam
//! over the branch weights, biases and variances (double iteration
//! optimization). Linear-Gaussian and fixed-branch-count GMM baselines
//! share the same trainer and evaluation path.
//!
//! Start with [`graph::Dag`], [`mpc::find_mpcs_fast`], [`model::build_model`]
//! and [`optim::dio_train`]; see the `examples/` directory for end-to-end
//! runs.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod graph;
pub mod model;
pub mod mpc;
pub mod optim;

pub use error::{Error, Result};

//! Generalization gaps of meta-learning pipelines and the
//! information-theoretic bounds that control them.
//!
//! The crate is organised around a [`gaps::Pipeline`]: a task environment,
//! a base learner, a meta-learner and a truncated squared loss. From a
//! pipeline you can estimate the average generalization gap by Monte Carlo
//! ([`gaps`]), measure how related the tasks are ([`env`]), estimate the
//! mutual information terms ([`info`]) and assemble upper bounds
//! ([`bounds`]). The [`harness`] module ties these together into sweeps
//! that write CSV, SVG and text reports.

pub mod bounds;
pub mod env;
pub mod error;
pub mod gaps;
pub mod harness;
pub mod info;
pub mod learn;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};

//! Particle filtering toolkit for value-guided sequence generation over
//! explicit, finite, layered Markov chains.
//!
//! The crate is organised around a reference chain `π_ref` with a terminal
//! reward `r*` and an approximate value function (the PRM) `V̂`:
//!
//! - [`chain`]: the layered chain, value tables, problem instances, JSON I/O
//!   and validation.
//! - [`oracle`]: exact enumeration of `V*`, tilted marginals, divergences,
//!   coverage constants and the theoretical TV bounds.
//! - [`samplers`]: SMC (both output options), SMC with rejection sampling,
//!   DMC with restart, SMC with independent offspring, action-level sampling,
//!   sequential importance sampling and best-of-N.
//! - [`vgb`]: the backtracking random walk, trajectory-to-forest parsing and
//!   the constructive coupling with independent-offspring SMC.
//! - [`hard`]: synthetic hard instances (SMC lower bound, variance blowup,
//!   myopic lower-bound construction, kernel switching).
//! - [`stats`]: TV, GOF tests, empirical accumulators and the `p_N` oracle.
//! - [`experiment`]: deterministic parallel trial campaigns and CSV/JSON
//!   reports used by the `gpf` CLI.

// `!(x > 0.0)` is used on purpose so NaN takes the failure branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod error;
pub mod experiment;
pub mod hard;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod samplers;
pub mod stats;
pub mod vgb;

pub use chain::{
    build_tree_chain, load_instance, save_instance, validate_instance, KernelSpec, LayeredChain, ProblemInstance,
    ValueTable, ValueTag, Violation,
};
pub use error::{Error, Result};
pub use model::{GuidedModel, SimRng};
pub use oracle::{LevelDistribution, Oracle};
pub use samplers::{Outcome, ParticleRun, Resampling, SamplerConfig, Strictness, ZTilde};
pub use vgb::{ParticleForest, VgbState};

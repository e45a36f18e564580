//! Exact computation and empirical verification for colored chain avoidance
//! in the Boolean lattice `P([n])`.
//!
//! A [`ForbiddenFamily`] lists colored chain patterns over colors `1..=m`. A
//! colored subset of `P([n])` is valid when no pattern appears on any of its
//! chains. The crate provides:
//!
//! * [`critical::omega_crit`]: the critical exponent, as a longest path over
//!   subsequence match states;
//! * [`enumeration::mu_valid`]: exact (weighted) counts of valid colored
//!   subsets by pruned backtracking;
//! * [`templates`]: templates, their weights and the extremal layered
//!   construction;
//! * [`supersat`]: chain statistics over random maximal chains and the
//!   codegree-capped hypergraph builder;
//! * [`containers`]: a fingerprint container algorithm and the branching
//!   process that covers every valid colored subset by light templates.

pub mod containers;
pub mod critical;
pub mod enumeration;
mod error;
pub mod lattice;
pub mod patterns;
pub mod supersat;
pub mod templates;

pub use containers::{branching_run, container_step, verify_coverage, BranchingRun};
pub use critical::{omega_crit, CriticalResult};
pub use enumeration::{mu_valid, CountResult, Measure};
pub use error::{Error, Result};
pub use lattice::{Band, Element, MaximalChain};
pub use patterns::{ChainPattern, ColorId, ColorSet, ForbiddenFamily, MatchState};
pub use supersat::{LeveledHypergraph, SupersatConstants};
pub use templates::Vertex;
pub use templates::{ChainProfile, Template, WeightVector};

//! Finite-horizon robust Markov decision process toolkit.
//!
//! The library models finite-horizon MDPs whose transition kernel is only
//! known to lie in a finite ambiguity set. A policy is scored by its
//! worst-case expected cumulative cost over that set, and the toolkit
//! provides:
//!
//! - exact policy evaluation by backward induction, with a
//!   trajectory-enumeration oracle for cross-checking ([`eval`]);
//! - worst-case (robust) evaluation over the ambiguity set ([`robust`]);
//! - static min-max solvers: exhaustive search over deterministic Markov
//!   policies and projected subgradient descent over randomized ones,
//!   plus a grid-based local-minimum certificate ([`solvers`]);
//! - generators for structured hard instances: the set-partition family,
//!   the three-stage local-minimizer gadget, and a discounted
//!   infinite-horizon embedding with an absorbing sink ([`generators`]);
//! - the dynamic (per-stage adversary) formulation solved by backward
//!   induction over per-state matrix games, with explicit
//!   rectangularization for consistency checks ([`dynamic`]);
//! - a numerical study of the local-minimizer gadget's optimization
//!   landscape ([`landscape`]);
//! - deterministic instance/report documents and seeded sampling for the
//!   verification suites ([`document`], [`sampling`], [`verify`]).

#![forbid(unsafe_code)]

pub mod document;
pub mod dynamic;
pub mod error;
pub mod eval;
pub mod generators;
pub mod instance;
pub mod landscape;
pub mod robust;
pub mod sampling;
pub mod solvers;
pub mod verify;

pub use error::RmdpError;
pub use instance::{
    AmbiguitySet, FiniteHorizonMdp, Kernel, PolicyMd, PolicyMr, RobustInstance, StageShape,
};
pub use robust::RobustEvaluation;

//! Hierarchical quantum-style routing for clustered vehicle routing problems.
//!
//! Customers are split into equal-size clusters ([`geometry`]), each cluster is
//! routed as an open-loop TSP with standard QAOA, and the cluster
//! representatives are routed with a two-vehicle VRP solved by multi-angle
//! QAOA. Both problems are encoded as QUBOs ([`qubo`]), mapped to Ising form
//! ([`ising`]), simulated exactly ([`qsim`]) with SPSA-tuned angles
//! ([`optim`]), decoded and verified ([`postprocess`]), and checked against
//! exhaustive oracles ([`exact`]). [`pipeline`] wires the stages together.

pub mod bitstring;
pub mod error;
pub mod exact;
pub mod geometry;
pub mod ising;
pub mod optim;
pub mod pipeline;
pub mod postprocess;
pub mod qsim;
pub mod qubo;

pub use bitstring::Bitstring;
pub use error::{Error, Result};

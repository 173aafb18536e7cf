//! Throughput and latency of entanglement distribution over quantum repeater
//! chains, computed exactly from Markov chain models and checked against a
//! seeded Monte Carlo simulator.
//!
//! * [`markov`]: stochastic matrices, equilibrium, fundamental matrix,
//!   hitting-time moments.
//! * [`protocol`]: chain builders for multiheralded generation and the
//!   two-link swap protocols, plus their closed forms.
//! * [`estimators`]: throughput/latency estimates and nested-chain recursions.
//! * [`simulator`]: trajectory and nested-chain Monte Carlo.
//! * [`sweep`]: parameter grids to CSV.
//! * [`cli`]: the `repeaterlab` command line.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod markov;
pub mod protocol;
pub mod simulator;
pub mod sweep;

pub use error::Error;
pub use estimators::{
    estimate_latency, estimate_throughput, nested_throughput, LatencyEstimate, NestedEstimate, NestedMethod,
    ThroughputEstimate,
};
pub use markov::{Distribution, EquilibriumMethod, FundamentalMatrix, HittingStats, MarkovError, StochasticMatrix};
pub use protocol::{
    build_multiheralded, build_two_link_double_heralded, build_two_link_single_heralded, MultiHeraldParams,
    ProtocolChain, ProtocolError, ProtocolParams, TwoLinkParams,
};
pub use simulator::{simulate_chain, simulate_nested, SimConfig, SimulationResult};

//! Event-driven Monte Carlo laboratory for a nearest-neighbour random walk
//! whose jump rates depend on a one-dimensional contact process.
//!
//! The contact process is realized through its graphical representation
//! (healing crosses at rate 1, infection arrows at rate lambda per bond), so
//! every initial configuration of one replica is evolved by the same
//! randomness and monotone couplings hold pathwise. On top of a realized
//! environment the walk jumps at rate gamma, stepping right with probability
//! `alpha_i / gamma` from a site in state `i`. The crate estimates the
//! asymptotic speed (three routes: ergodic averages, subadditivity from the
//! all-ones state, and regeneration cycles), the diffusive volatility,
//! large-deviation decay rates, and the coupling/regeneration structure the
//! limit theorems rest on.
//!
//! Everything is deterministic given a master seed: each replica derives
//! named ChaCha substreams (environment, initial state, walk, burn-in) from
//! `(seed, replica index)` alone, so results are independent of worker count
//! and execution order.

pub mod contact;
pub mod events;
pub mod invariants;
pub mod model;
pub mod regen;
pub mod replicas;
pub mod rng;
pub mod stats;
pub mod walker;

pub use contact::cluster::{
    cluster, estimate_iota, wave, wedge_survivor_left, wide_spread_markers, ClusterTrace,
    IotaEstimate, WaveEdge, WedgeQuery,
};
pub use contact::{
    evolve, sample_equilibrium, ChangePoint, ConfigTrajectory, Configuration, EquilibriumSample,
};
pub use events::{sample_event_log, Event, EventKind, EventLog};
pub use model::{ModelParams, Window};
pub use rng::{RngStreams, StreamKind};
pub use walker::{
    build_coupled_walks, build_walk, decompose, JumpDecomposition, WalkDriver, WalkPath,
};

//! Uplink interference coordination for a cellular-connected UAV.
//!
//! A UAV transmitting uplink data shares resource blocks with ground users
//! across a large hexagonal region of cells, because its line-of-sight
//! channels reach far more base stations than any terrestrial transmitter.
//! This crate models that setting end to end and solves the joint per-RB
//! cell-association and power-allocation problem that maximizes the weighted
//! sum-rate of the UAV and the co-channel ground users:
//!
//! * [`topology`] - hexagonal layout, q-ring neighborhoods, coordination region
//! * [`channel`] - BS array and UAV antenna patterns, path-loss tables,
//!   shadowing/fading draws, noise-plus-residual-interference powers
//! * [`scheduler`] - ground-UE placement and q-tier RB assignment
//! * [`rates`] - rate formulas and the weighted objective
//! * [`icic`] - optimal association, egoistic/altruistic/terrestrial baselines,
//!   and the centralized successive-surrogate solver
//! * [`dual_bound`] - Lagrangian dual upper bound with per-RB subproblems
//!   solved globally by polyblock outer approximation
//! * [`decentral`] - clustered protocol: heads aggregate prices and gains,
//!   the UAV solves from those aggregates alone, with message accounting
//! * [`scenario`] / [`report`] - configuration, instance assembly, batch
//!   sweeps and persistence
//!
//! Everything is deterministic for a fixed master seed: gain draws derive
//! per-link generators from (seed, stream, link id), so results do not depend
//! on evaluation order or thread count.

pub mod channel;
pub mod decentral;
pub mod dual_bound;
pub mod icic;
pub mod rates;
pub mod report;
pub mod scenario;
pub mod scheduler;
pub mod topology;

pub use channel::{ChannelParams, ChannelState, PathlossModel, PathlossTable, UavAntenna, UlaPattern};
pub use icic::{Association, IcicSolution, PowerAllocation, Scheme, SolverOptions};
pub use rates::{RateReport, Weights};
pub use scenario::{Instance, ScenarioConfig};
pub use scheduler::{GroundUe, RbOccupancy};
pub use topology::HexGrid;

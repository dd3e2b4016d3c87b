//! Compartmental traffic dynamics on rooted directed trees with FIFO
//! diverging junctions.
//!
//! The crate models a network of road cells as a rooted, directed tree.
//! Every cell carries a density state, a demand function (traffic that
//! wants to move downstream) and a supply function (space the cell still
//! offers). Diverging junctions follow the FIFO rule: the outflow of the
//! upstream cell is capped by the most restrictive downstream supply,
//! scaled by the corresponding turning rate, so one congested branch
//! blocks the whole diverge.
//!
//! These dynamics are not monotone with respect to the positive orthant,
//! but they are monotone with respect to the polyhedral cone
//! `{x : P x >= 0}` where `P = (I - R)^-1` is built from the routing
//! matrix `R` of turning rates. The crate provides:
//!
//! - [`network`]: tree validation, routing matrix `R`, cumulative matrix `P`;
//! - [`fd`]: demand/supply fundamental diagrams (piecewise-affine family);
//! - [`dynamics`]: FIFO flow maps and the original / transformed vector fields;
//! - [`order`]: the cone order, comparisons, and the `z = P x` transform;
//! - [`sim`]: fixed-step explicit integrators with flow recording;
//! - [`harness`]: verification suites (reference ten-cell experiment,
//!   randomized order-preservation tests, finite-difference sign checks,
//!   orthant counterexamples, cumulative-flow identity).
//!
//! Batch verification runs are data-parallel via rayon when the `parallel`
//! feature (default) is enabled; they fall back to plain sequential
//! iteration otherwise. Results are merged by item index so reports are
//! identical in both modes.

pub mod dynamics;
pub mod fd;
pub mod harness;
pub mod network;
pub mod order;
pub(crate) mod parallel;
pub mod sim;

pub use dynamics::{FlowRecord, StateVector, ZVector};
pub use fd::{FdSet, FundamentalDiagram, PiecewiseAffineFd};
pub use network::{CumulativeMatrix, Network, NetworkSpec, RoutingMatrix};
pub use order::{ConeOrder, OrderResult};
pub use sim::{DemandSchedule, Method, SimConfig, Trajectory};

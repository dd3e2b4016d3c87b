//! Verification suites: the ten-cell reference experiment, randomized
//! order-preservation tests, finite-difference sign checks of the
//! transformed dynamics, constructive orthant counterexamples, and the
//! cumulative-flow interpretation of the `z` states.

mod cumulative;
pub mod example1;
pub mod generators;
mod km;
mod pairs;
mod witness;

pub use cumulative::{cumulative_flow_check, CumulativeFlowReport};
pub use example1::{
    build_example1, example1_order_tolerance, run_example1, Example1Run, Example1Setup,
    PairOrderReport, EXAMPLE1_PLOT_CELLS,
};
pub use km::{km_finite_difference_check, KmParams, KmReport};
pub use pairs::{
    generate_ordered_pair, monotonicity_property_test, MonotonicityReport, PairFailure,
};
pub use witness::{orthant_violation_witness, OrthantWitness};

use crate::dynamics::StateVector;
use crate::order::ConeOrder;
use crate::sim::{SimError, Trajectory};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("setup invariant violated: {0}")]
    SetupInvariantViolated(String),
    #[error("trajectories do not share a sampling grid")]
    GridMismatch,
    #[error("network has no diverging junction")]
    NoDivergeInNetwork,
    #[error("all sample points were skipped as nonsmooth; enlarge the sample region")]
    AllPointsSkipped,
    #[error("state did not drain: |x(T)| = {final_norm} > {required}; increase the horizon")]
    NotDrained { final_norm: f64, required: f64 },
    #[error("this check requires zero external demand")]
    ExternalDemandNotZero,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Order(#[from] crate::order::OrderError),
    #[error(transparent)]
    Network(#[from] crate::network::NetworkError),
    #[error(transparent)]
    Dynamics(#[from] crate::dynamics::DynamicsError),
}

/// Sample-by-sample record of one ordered-pair check: the minimum entry of
/// `P (x(t) - y(t))` per sample, and the first violation if any.
#[derive(Debug, Clone)]
pub struct OrderPreservationReport {
    pub per_sample_min: Vec<f64>,
    pub pass: bool,
    /// `(time, component)` of the first entry below `-tol`.
    pub first_violation: Option<(f64, usize)>,
    /// Smallest margin entry over all samples and components.
    pub min_margin: f64,
    pub tol: f64,
}

/// Checks that `upper` dominates `lower` in the cone order at every
/// recorded sample, within `tol`.
pub fn check_order_preservation(
    order: &ConeOrder,
    upper: &Trajectory<StateVector>,
    lower: &Trajectory<StateVector>,
    tol: f64,
) -> Result<OrderPreservationReport, HarnessError> {
    if !upper.same_grid(lower) {
        return Err(HarnessError::GridMismatch);
    }
    let p = order.cumulative().matrix();
    let mut per_sample_min = Vec::with_capacity(upper.len());
    let mut min_margin = f64::INFINITY;
    let mut first_violation = None;
    for ((t, x), y) in upper.times().iter().zip(upper.states()).zip(lower.states()) {
        let u = p * (x.raw() - y.raw());
        let mut sample_min = f64::INFINITY;
        for (e, &value) in u.iter().enumerate() {
            if value < sample_min {
                sample_min = value;
            }
            if value < -tol && first_violation.is_none() {
                first_violation = Some((*t, e));
            }
        }
        min_margin = min_margin.min(sample_min);
        per_sample_min.push(sample_min);
    }
    Ok(OrderPreservationReport {
        per_sample_min,
        pass: first_violation.is_none(),
        first_violation,
        min_margin,
        tol,
    })
}

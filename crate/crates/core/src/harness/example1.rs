//! The ten-cell reference experiment: a three-level diverging tree whose
//! capacities are balanced so that every cell saturates simultaneously
//! under a steady root inflow, six cone-ordered initial conditions, and
//! the order-preservation check over all pairs of runs.

use super::{check_order_preservation, HarnessError, OrderPreservationReport};
use crate::dynamics::StateVector;
use crate::fd::{FdSet, FundamentalDiagram, PiecewiseAffineFd};
use crate::network::{Edge, Network, NetworkSpec};
use crate::order::{ConeOrder, OrderResult};
use crate::parallel;
use crate::sim::{simulate, SimConfig, Trajectory};
use std::sync::Arc;

/// Steady root inflow the capacities are balanced against.
pub const ROOT_CAPACITY: f64 = 50000.0 / 3.0;
/// Free-flow slope shared by all cells.
pub const FREE_FLOW_SPEED: f64 = 100.0;
/// Congestion-wave slope shared by all cells.
pub const WAVE_SPEED: f64 = 100.0 / 3.0;
/// Cells (1-based) whose cumulative states are exported for plotting.
pub const EXAMPLE1_PLOT_CELLS: [usize; 3] = [2, 6, 9];

/// Initially congested cells (1-based) per run k = 1..6.
const CONGESTED: [&[usize]; 6] = [
    &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
    &[1, 2, 3, 4, 10],
    &[1, 6, 7],
    &[2, 7, 9, 10],
    &[4, 5, 6],
    &[],
];

fn edges() -> Vec<Edge> {
    vec![
        Edge::new(1, 2, 0.9),
        Edge::new(1, 3, 0.1),
        Edge::new(2, 4, 1.0 / 3.0),
        Edge::new(2, 5, 1.0 / 3.0),
        Edge::new(2, 6, 1.0 / 3.0),
        Edge::new(4, 7, 0.5),
        Edge::new(4, 8, 0.5),
        Edge::new(6, 9, 0.5),
        Edge::new(6, 10, 0.5),
    ]
}

/// The validated ten-cell network with balanced capacities and the six
/// cone-ordered initial conditions.
#[derive(Debug, Clone)]
pub struct Example1Setup {
    pub network: Network,
    pub fds: FdSet,
    /// Capacity per cell, propagated down the tree from the root.
    pub capacities: Vec<f64>,
    /// Six initial conditions, totally ordered in the cone order.
    pub initial_conditions: Vec<StateVector>,
}

impl Example1Setup {
    /// Congested initial density of a cell: twice its critical density.
    pub fn congested_density(&self, e: usize) -> f64 {
        2.0 * self.capacities[e] / FREE_FLOW_SPEED
    }

    pub fn congested_cells(&self, k: usize) -> &'static [usize] {
        CONGESTED[k]
    }
}

/// Builds the setup and asserts its invariants, including the total cone
/// ordering of the six initial conditions.
pub fn build_example1() -> Result<Example1Setup, HarnessError> {
    let n = 10;
    let edges = edges();

    // Propagate capacities down the tree so that steady flows saturate all
    // cells simultaneously: F_e = beta[e, e+] * F_[e+].
    let mut capacities = vec![0.0; n];
    capacities[0] = ROOT_CAPACITY;
    // the edge list is already ordered parent-before-child
    for edge in &edges {
        capacities[edge.to - 1] = edge.rate * capacities[edge.from - 1];
    }
    let jam: Vec<f64> = capacities
        .iter()
        .map(|f| f / FREE_FLOW_SPEED + f / WAVE_SPEED)
        .collect();

    let spec = NetworkSpec {
        n_cells: n,
        root: 1,
        edges,
        jam_densities: jam.clone(),
    };
    let network = Network::build(&spec)?;

    let mut fds: Vec<Arc<dyn FundamentalDiagram>> = Vec::with_capacity(n);
    for e in 0..n {
        fds.push(Arc::new(
            PiecewiseAffineFd::new(FREE_FLOW_SPEED, WAVE_SPEED, capacities[e], jam[e]).map_err(
                |err| HarnessError::SetupInvariantViolated(format!("cell {}: {err}", e + 1)),
            )?,
        ));
    }
    let fds = FdSet::new(&network, fds)
        .map_err(|err| HarnessError::SetupInvariantViolated(err.to_string()))?;

    let mut initial_conditions = Vec::with_capacity(6);
    for congested in CONGESTED {
        let mut x = vec![0.0; n];
        for &cell in congested {
            x[cell - 1] = 2.0 * capacities[cell - 1] / FREE_FLOW_SPEED;
        }
        initial_conditions.push(StateVector::new(x));
    }

    let setup = Example1Setup {
        network,
        fds,
        capacities,
        initial_conditions,
    };

    // Congested densities sit strictly inside the box.
    for (k, x) in setup.initial_conditions.iter().enumerate() {
        for e in 0..n {
            let v = x.component(e);
            if v < 0.0 || v > setup.network.jam_density(e) {
                return Err(HarnessError::SetupInvariantViolated(format!(
                    "initial condition {} leaves the box at cell {}",
                    k + 1,
                    e + 1
                )));
            }
        }
    }

    // Total ordering under the cone order.
    let order = ConeOrder::for_network(&setup.network)?;
    for k in 0..6 {
        for l in (k + 1)..6 {
            let result =
                order.compare(&setup.initial_conditions[k], &setup.initial_conditions[l])?;
            if !matches!(result, OrderResult::GreaterEqual | OrderResult::Equal) {
                return Err(HarnessError::SetupInvariantViolated(format!(
                    "initial conditions {} and {} are not ordered: {result:?}",
                    k + 1,
                    l + 1
                )));
            }
        }
    }

    Ok(setup)
}

/// Order-preservation tolerance for the reference runs:
/// `1e-6 * max_e z_e` of the fully congested initial condition.
pub fn example1_order_tolerance(setup: &Example1Setup, order: &ConeOrder) -> f64 {
    1e-6 * order.to_z(&setup.initial_conditions[0]).max_abs()
}

/// One checked pair of runs: `upper` (smaller k) must dominate `lower`.
#[derive(Debug, Clone)]
pub struct PairOrderReport {
    /// 0-based run indices (k - 1, l - 1).
    pub upper: usize,
    pub lower: usize,
    pub report: OrderPreservationReport,
}

/// All six reference trajectories plus the 15 pairwise order checks.
#[derive(Debug)]
pub struct Example1Run {
    pub setup: Example1Setup,
    pub trajectories: Vec<Trajectory<StateVector>>,
    pub pair_reports: Vec<PairOrderReport>,
    pub tol: f64,
    pub z_scale: f64,
}

impl Example1Run {
    pub fn all_pairs_pass(&self) -> bool {
        self.pair_reports.iter().all(|p| p.report.pass)
    }
}

/// Simulates the six initial conditions with zero external demand and
/// checks order preservation for every pair `k < l` at every sample.
pub fn run_example1(cfg: &SimConfig) -> Result<Example1Run, HarnessError> {
    if !cfg.demand.is_zero() {
        return Err(HarnessError::ExternalDemandNotZero);
    }
    let setup = build_example1()?;
    let order = ConeOrder::for_network(&setup.network)?;
    let z_scale = order.to_z(&setup.initial_conditions[0]).max_abs();
    let tol = 1e-6 * z_scale;

    let results = parallel::map_indexed(6, |k| {
        simulate(
            &setup.network,
            &setup.fds,
            &setup.initial_conditions[k],
            cfg,
        )
    });
    let mut trajectories = Vec::with_capacity(6);
    for result in results {
        trajectories.push(result?);
    }

    let mut pair_reports = Vec::with_capacity(15);
    for k in 0..6 {
        for l in (k + 1)..6 {
            let report = check_order_preservation(&order, &trajectories[k], &trajectories[l], tol)?;
            pair_reports.push(PairOrderReport {
                upper: k,
                lower: l,
                report,
            });
        }
    }

    Ok(Example1Run {
        setup,
        trajectories,
        pair_reports,
        tol,
        z_scale,
    })
}

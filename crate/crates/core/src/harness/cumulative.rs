//! Cumulative-flow interpretation of the transformed states: with no
//! external inflow, `z_e(0)` equals the total future outflow of cell `e`,
//! so integrating the recorded outflows over a draining run must recover
//! the initial cumulative state.

use super::HarnessError;
use crate::dynamics::StateVector;
use crate::fd::FdSet;
use crate::network::Network;
use crate::order::ConeOrder;
use crate::sim::{simulate, SimConfig};

#[derive(Debug, Clone)]
pub struct CumulativeFlowReport {
    pub pass: bool,
    /// Initial cumulative state `z(0) = P x(0)` per cell.
    pub initial_cumulative: Vec<f64>,
    /// Trapezoid-rule integral of each cell's outflow over the run.
    pub integrated_outflow: Vec<f64>,
    /// `|z_e(0) - integral_e|` per cell.
    pub errors: Vec<f64>,
    pub worst_cell: usize,
    pub worst_error: f64,
    /// Largest density component at the end of the run.
    pub final_state_max: f64,
    pub tol: f64,
}

/// Simulates from `x0` with zero external demand until the network is
/// empty (within `eps_empty`), integrates the recorded outflows by the
/// trapezoid rule, and compares against `z(0) = P x0` per cell.
pub fn cumulative_flow_check(
    net: &Network,
    fds: &FdSet,
    order: &ConeOrder,
    x0: &StateVector,
    cfg: &SimConfig,
    eps_empty: f64,
    tol: f64,
) -> Result<CumulativeFlowReport, HarnessError> {
    if !cfg.demand.is_zero() {
        return Err(HarnessError::ExternalDemandNotZero);
    }
    let trajectory = simulate(net, fds, x0, cfg)?;
    let final_state_max = trajectory.final_state().max_abs();
    if final_state_max > eps_empty {
        return Err(HarnessError::NotDrained {
            final_norm: final_state_max,
            required: eps_empty,
        });
    }

    let n = net.n_cells();
    let times = trajectory.times();
    let flows = trajectory.flows();
    let mut integrated = vec![0.0; n];
    for k in 1..times.len() {
        let h = times[k] - times[k - 1];
        for (acc, (left, right)) in integrated
            .iter_mut()
            .zip(flows[k - 1].outflow.iter().zip(flows[k].outflow.iter()))
        {
            *acc += 0.5 * h * (left + right);
        }
    }

    let z0 = order.to_z(x0);
    let mut errors = vec![0.0; n];
    let mut worst_cell = 0;
    let mut worst_error: f64 = 0.0;
    for e in 0..n {
        errors[e] = (z0.component(e) - integrated[e]).abs();
        if errors[e] > worst_error {
            worst_error = errors[e];
            worst_cell = e;
        }
    }

    Ok(CumulativeFlowReport {
        pass: worst_error <= tol,
        initial_cumulative: z0.as_slice().to_vec(),
        integrated_outflow: integrated,
        errors,
        worst_cell,
        worst_error,
        final_state_max,
        tol,
    })
}

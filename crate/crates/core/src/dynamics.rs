//! FIFO flow maps and the two vector fields of the compartmental model.
//!
//! The original field is `xdot = f(t, x) = inflow - outflow` with the FIFO
//! outflow rule: a cell's outflow is capped by its own demand and by every
//! downstream supply scaled by the inverse turning rate. The transformed
//! field `zdot = g(t, z)` acts on cumulative states `z = P x` and reduces
//! to `-outflow` plus the external inflow at the root.

use crate::fd::FdSet;
use crate::network::Network;
use nalgebra::DVector;
use thiserror::Error;

/// Relative slack (in units of each cell's jam density) by which a state
/// may leave the box before conversions treat it as an error.
pub const BOX_TOL_REL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("state component {cell} = {value} outside [0, {jam}] beyond tolerance")]
    StateOutOfBox { cell: usize, value: f64, jam: f64 },
    #[error("state has {got} components, network has {expected} cells")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Cell densities `x`, one per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector(DVector<f64>);

/// Cumulative states `z = P x`: traffic volume each cell still has to
/// serve, assuming no further external inflow.
#[derive(Debug, Clone, PartialEq)]
pub struct ZVector(DVector<f64>);

macro_rules! vector_newtype {
    ($name:ident) => {
        impl $name {
            pub fn new(values: Vec<f64>) -> Self {
                $name(DVector::from_vec(values))
            }

            pub fn zeros(n: usize) -> Self {
                $name(DVector::zeros(n))
            }

            pub fn from_raw(values: DVector<f64>) -> Self {
                $name(values)
            }

            pub fn raw(&self) -> &DVector<f64> {
                &self.0
            }

            pub fn into_raw(self) -> DVector<f64> {
                self.0
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            pub fn component(&self, e: usize) -> f64 {
                self.0[e]
            }

            pub fn as_slice(&self) -> &[f64] {
                self.0.as_slice()
            }

            pub fn max_abs(&self) -> f64 {
                self.0.amax()
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(values: Vec<f64>) -> Self {
                Self::new(values)
            }
        }
    };
}

vector_newtype!(StateVector);
vector_newtype!(ZVector);

/// Flows evaluated at one state: per-cell outflow, per-cell inflow, and
/// the external demand offered at the root.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    pub outflow: DVector<f64>,
    pub inflow: DVector<f64>,
    pub external_demand: f64,
}

/// FIFO outflows: `phi_e = min(d_e(x_e), min_i s_i(x_i) / beta_[i,e])`
/// over the downstream cells `i` of `e`. Sink-terminating cells have no
/// downstream restriction.
pub fn fifo_outflows(net: &Network, fds: &FdSet, x: &StateVector) -> DVector<f64> {
    let mut phi = DVector::zeros(net.n_cells());
    for e in 0..net.n_cells() {
        let mut flow = fds.fd(e).demand(x.component(e));
        for &(i, rate) in net.downstream(e) {
            flow = flow.min(fds.fd(i).supply(x.component(i)) / rate);
        }
        phi[e] = flow;
    }
    phi
}

/// Inflows: `phi_in_e = beta_[e,e+] * phi_[e+]` for non-root cells; the
/// root receives `min(w_r, s_r(x_r))`, surplus external demand is
/// discarded.
pub fn inflows(
    net: &Network,
    fds: &FdSet,
    outflow: &DVector<f64>,
    x: &StateVector,
    external_demand: f64,
) -> DVector<f64> {
    let mut phi_in = DVector::zeros(net.n_cells());
    for e in 0..net.n_cells() {
        phi_in[e] = match net.upstream(e) {
            Some((parent, rate)) => rate * outflow[parent],
            None => external_demand.min(fds.fd(e).supply(x.component(e))),
        };
    }
    phi_in
}

/// Evaluates outflows and inflows together.
pub fn flows(net: &Network, fds: &FdSet, x: &StateVector, external_demand: f64) -> FlowRecord {
    let outflow = fifo_outflows(net, fds, x);
    let inflow = inflows(net, fds, &outflow, x, external_demand);
    FlowRecord {
        outflow,
        inflow,
        external_demand,
    }
}

/// Original vector field `f(t, x) = inflow - outflow`.
pub fn vector_field(
    net: &Network,
    fds: &FdSet,
    x: &StateVector,
    external_demand: f64,
) -> DVector<f64> {
    let record = flows(net, fds, x, external_demand);
    record.inflow - record.outflow
}

/// Recovers `x = (I - R) z` using the tree structure:
/// `x_e = z_e - beta_[e,e+] * z_[e+]`, and `x_r = z_r` at the root.
pub(crate) fn state_from_cumulative(net: &Network, z: &DVector<f64>) -> DVector<f64> {
    let mut x = DVector::zeros(net.n_cells());
    for e in 0..net.n_cells() {
        x[e] = match net.upstream(e) {
            Some((parent, rate)) => z[e] - rate * z[parent],
            None => z[e],
        };
    }
    x
}

/// Checks box membership within `BOX_TOL_REL` of each jam density and
/// returns the clamped state.
pub(crate) fn clamp_into_box(
    net: &Network,
    x: DVector<f64>,
) -> Result<DVector<f64>, DynamicsError> {
    let mut x = x;
    for e in 0..net.n_cells() {
        let jam = net.jam_density(e);
        let tol = BOX_TOL_REL * jam;
        if x[e] < -tol || x[e] > jam + tol {
            return Err(DynamicsError::StateOutOfBox {
                cell: e + 1,
                value: x[e],
                jam,
            });
        }
        x[e] = x[e].clamp(0.0, jam);
    }
    Ok(x)
}

/// Transformed vector field `g(t, z)`: recover `x = (I - R) z`, evaluate
/// the flows, and return `zdot_e = -phi_e` for every cell, plus the
/// external inflow at the root.
pub fn transformed_vector_field(
    net: &Network,
    fds: &FdSet,
    z: &ZVector,
    external_demand: f64,
) -> Result<DVector<f64>, DynamicsError> {
    if z.len() != net.n_cells() {
        return Err(DynamicsError::DimensionMismatch {
            expected: net.n_cells(),
            got: z.len(),
        });
    }
    let x = clamp_into_box(net, state_from_cumulative(net, z.raw()))?;
    let x = StateVector::from_raw(x);
    let record = flows(net, fds, &x, external_demand);
    let mut zdot = -record.outflow;
    zdot[net.root()] += record.inflow[net.root()];
    Ok(zdot)
}

//! Randomized order-preservation testing: generate pairs that are ordered
//! in the cone order by construction, simulate both, and check that the
//! order survives along the trajectories.

use super::{check_order_preservation, HarnessError};
use crate::dynamics::StateVector;
use crate::network::Network;
use crate::order::ConeOrder;
use crate::parallel;
use crate::sim::{simulate, SimConfig};
use nalgebra::DVector;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Shift direction `c = (I - R) u` and the largest step `s` keeping
/// `x0 - s c` inside the state box (`infinity` when `c = 0`).
pub(crate) fn cone_shift_bounds(
    net: &Network,
    x0: &StateVector,
    u: &DVector<f64>,
) -> (DVector<f64>, f64) {
    let mut c = DVector::zeros(net.n_cells());
    for e in 0..net.n_cells() {
        c[e] = match net.upstream(e) {
            Some((parent, rate)) => u[e] - rate * u[parent],
            None => u[e],
        };
    }
    let mut s_max = f64::INFINITY;
    for e in 0..net.n_cells() {
        if c[e] > 0.0 {
            s_max = s_max.min(x0.component(e) / c[e]);
        } else if c[e] < 0.0 {
            s_max = s_max.min((net.jam_density(e) - x0.component(e)) / -c[e]);
        }
    }
    (c, s_max)
}

/// Draws `u >= 0` and returns `(x0, y0)` with `y0 = x0 - s (I - R) u`, so
/// that `P (x0 - y0) = s u >= 0` holds by construction. The step `s` is
/// scaled down until `y0` stays inside the state box. Degenerate inputs
/// (the empty state, or no feasible step) yield the equal pair.
pub fn generate_ordered_pair(
    net: &Network,
    order: &ConeOrder,
    x0: &StateVector,
    seed: u64,
) -> (StateVector, StateVector) {
    debug_assert_eq!(x0.len(), order.dim());
    if x0.max_abs() == 0.0 {
        return (x0.clone(), x0.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = DVector::from_fn(net.n_cells(), |e, _| {
        rng.random_range(0.0..0.5 * net.jam_density(e))
    });
    let (c, s_max) = cone_shift_bounds(net, x0, &u);
    if s_max.is_nan() || s_max <= 0.0 {
        return (x0.clone(), x0.clone());
    }
    let s = (s_max * rng.random_range(0.5..0.95)).min(1.0);
    let mut y0 = x0.raw() - s * c;
    for e in 0..net.n_cells() {
        y0[e] = y0[e].clamp(0.0, net.jam_density(e));
    }
    (x0.clone(), StateVector::from_raw(y0))
}

/// One pair that lost the order, with everything needed to reproduce it.
#[derive(Debug, Clone)]
pub struct PairFailure {
    pub pair_index: usize,
    pub seed: u64,
    pub time: f64,
    pub component: usize,
    pub margin: f64,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
}

/// Aggregate outcome of a randomized order-preservation run.
#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    pub n_pairs: usize,
    pub n_pass: usize,
    /// Smallest margin entry seen over all pairs, samples, and components.
    pub worst_margin: f64,
    /// Tolerance as a fraction of each pair's cumulative-state scale.
    pub tol_rel: f64,
    pub failures: Vec<PairFailure>,
}

impl MonotonicityReport {
    pub fn pass(&self) -> bool {
        self.n_pass == self.n_pairs
    }
}

/// Simulates `n_pairs` randomly generated cone-ordered pairs and checks
/// order preservation at every sample. Pairs get independent RNG streams,
/// so reports do not depend on execution order or thread count.
pub fn monotonicity_property_test(
    net: &Network,
    fds: &crate::fd::FdSet,
    order: &ConeOrder,
    n_pairs: usize,
    cfg: &SimConfig,
    seed: u64,
    tol_rel: f64,
) -> Result<MonotonicityReport, HarnessError> {
    assert!(n_pairs >= 1, "need at least one pair");

    struct PairOutcome {
        pass: bool,
        min_margin: f64,
        failure: Option<PairFailure>,
    }

    let outcomes =
        parallel::map_indexed(n_pairs, |pair_index| -> Result<PairOutcome, HarnessError> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1 + pair_index as u64);
            let x0 = StateVector::new(
                (0..net.n_cells())
                    .map(|e| rng.random_range(0.05..0.95) * net.jam_density(e))
                    .collect(),
            );
            let pair_seed = rng.next_u64();
            let (x0, y0) = generate_ordered_pair(net, order, &x0, pair_seed);

            let scale = order.to_z(&x0).max_abs();
            let tol = tol_rel * scale;
            let upper = simulate(net, fds, &x0, cfg)?;
            let lower = simulate(net, fds, &y0, cfg)?;
            let report = check_order_preservation(order, &upper, &lower, tol)?;
            let failure = report.first_violation.map(|(time, component)| PairFailure {
                pair_index,
                seed: pair_seed,
                time,
                component,
                margin: report.min_margin,
                x0: x0.as_slice().to_vec(),
                y0: y0.as_slice().to_vec(),
            });
            Ok(PairOutcome {
                pass: report.pass,
                min_margin: report.min_margin,
                failure,
            })
        });

    let mut n_pass = 0;
    let mut worst_margin = f64::INFINITY;
    let mut failures = Vec::new();
    for outcome in outcomes {
        let outcome = outcome?;
        if outcome.pass {
            n_pass += 1;
        }
        worst_margin = worst_margin.min(outcome.min_margin);
        if let Some(failure) = outcome.failure {
            failures.push(failure);
        }
    }

    Ok(MonotonicityReport {
        n_pairs,
        n_pass,
        worst_margin,
        tol_rel,
        failures,
    })
}

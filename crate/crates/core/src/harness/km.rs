//! Finite-difference sign check of the transformed dynamics: at smooth
//! interior points, every off-diagonal entry of the Jacobian of
//! `g(z)` must be nonnegative — the off-diagonal monotonicity condition
//! that makes the transformed system order preserving.

use super::HarnessError;
use crate::dynamics::{transformed_vector_field, StateVector, ZVector};
use crate::fd::FdSet;
use crate::network::Network;
use crate::order::ConeOrder;
use crate::parallel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative margin (of each jam density) around fundamental-diagram
/// breakpoints inside which a sample counts as nonsmooth.
const BREAKPOINT_MARGIN_REL: f64 = 1e-6;
/// Relative gap below which the two smallest arguments of a min count as
/// tied, making the argmin ambiguous.
const TIE_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct KmParams {
    pub n_points: usize,
    /// Central-difference step in cumulative-state units.
    pub step: f64,
    /// Entries must be `>= -tol`.
    pub tol: f64,
    pub external_demand: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct KmReport {
    pub requested: usize,
    pub evaluated: usize,
    pub skipped: usize,
    /// Smallest off-diagonal estimate seen.
    pub min_entry: f64,
    /// `(point, row, column)` of the smallest estimate.
    pub worst: Option<(usize, usize, usize)>,
    pub tol: f64,
}

impl KmReport {
    pub fn pass(&self) -> bool {
        self.min_entry >= -self.tol
    }
}

/// Central-difference Jacobian of an arbitrary vector field; exercised by
/// sign-check tests for both the transformed and the original dynamics.
#[cfg(test)]
pub(crate) fn central_jacobian<F>(
    field: F,
    at: &nalgebra::DVector<f64>,
    step: f64,
) -> nalgebra::DMatrix<f64>
where
    F: Fn(&nalgebra::DVector<f64>) -> nalgebra::DVector<f64>,
{
    let n = at.len();
    let mut jacobian = nalgebra::DMatrix::zeros(n, n);
    for j in 0..n {
        let mut plus = at.clone();
        plus[j] += step;
        let mut minus = at.clone();
        minus[j] -= step;
        let df = (field(&plus) - field(&minus)) / (2.0 * step);
        jacobian.set_column(j, &df);
    }
    jacobian
}

/// True when the smallest two values are within `TIE_REL` of each other,
/// i.e. the argmin of their min is ambiguous at this point.
fn has_min_tie(values: &[f64]) -> bool {
    if values.len() < 2 {
        return false;
    }
    let mut smallest = f64::INFINITY;
    let mut second = f64::INFINITY;
    for &v in values {
        if v < smallest {
            second = smallest;
            smallest = v;
        } else if v < second {
            second = v;
        }
    }
    second.is_finite() && (second - smallest) <= TIE_REL * smallest.abs().max(1.0)
}

/// A point is smooth when no cell density sits near a diagram breakpoint
/// and no min in the flow evaluation is tied.
fn is_smooth_point(net: &Network, fds: &FdSet, x: &StateVector, external_demand: f64) -> bool {
    for e in 0..net.n_cells() {
        let margin = BREAKPOINT_MARGIN_REL * net.jam_density(e);
        for bp in fds.fd(e).breakpoints() {
            if (x.component(e) - bp).abs() < margin {
                return false;
            }
        }
    }
    let mut args = Vec::new();
    for e in 0..net.n_cells() {
        args.clear();
        args.push(fds.fd(e).demand(x.component(e)));
        for &(i, rate) in net.downstream(e) {
            args.push(fds.fd(i).supply(x.component(i)) / rate);
        }
        if has_min_tie(&args) {
            return false;
        }
    }
    let root = net.root();
    if has_min_tie(&[external_demand, fds.fd(root).supply(x.component(root))]) {
        return false;
    }
    true
}

/// Samples random interior points of the transformed state set, skips
/// those where the dynamics are nonsmooth, and estimates all off-diagonal
/// Jacobian entries of the transformed field by central differences.
pub fn km_finite_difference_check(
    net: &Network,
    fds: &FdSet,
    order: &ConeOrder,
    params: &KmParams,
) -> Result<KmReport, HarnessError> {
    assert!(params.n_points >= 1, "need at least one sample point");
    assert!(params.step > 0.0, "finite-difference step must be positive");
    let n = net.n_cells();

    enum PointOutcome {
        Skipped,
        Evaluated {
            min_entry: f64,
            row: usize,
            col: usize,
        },
    }

    let outcomes = parallel::map_indexed(
        params.n_points,
        |point| -> Result<PointOutcome, HarnessError> {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(1 + point as u64);
            let x = StateVector::new(
                (0..n)
                    .map(|e| rng.random_range(0.02..0.98) * net.jam_density(e))
                    .collect(),
            );
            if !is_smooth_point(net, fds, &x, params.external_demand) {
                return Ok(PointOutcome::Skipped);
            }
            let z = order.to_z(&x);

            let mut min_entry = f64::INFINITY;
            let mut location = (0, 0);
            for j in 0..n {
                let mut plus = z.raw().clone();
                plus[j] += params.step;
                let mut minus = z.raw().clone();
                minus[j] -= params.step;
                let g_plus = transformed_vector_field(
                    net,
                    fds,
                    &ZVector::from_raw(plus),
                    params.external_demand,
                )?;
                let g_minus = transformed_vector_field(
                    net,
                    fds,
                    &ZVector::from_raw(minus),
                    params.external_demand,
                )?;
                for e in 0..n {
                    if e == j {
                        continue;
                    }
                    let entry = (g_plus[e] - g_minus[e]) / (2.0 * params.step);
                    if entry < min_entry {
                        min_entry = entry;
                        location = (e, j);
                    }
                }
            }
            Ok(PointOutcome::Evaluated {
                min_entry,
                row: location.0,
                col: location.1,
            })
        },
    );

    let mut evaluated = 0;
    let mut skipped = 0;
    let mut min_entry = f64::INFINITY;
    let mut worst = None;
    for (point, outcome) in outcomes.into_iter().enumerate() {
        match outcome? {
            PointOutcome::Skipped => skipped += 1,
            PointOutcome::Evaluated {
                min_entry: m,
                row,
                col,
            } => {
                evaluated += 1;
                if m < min_entry {
                    min_entry = m;
                    worst = Some((point, row, col));
                }
            }
        }
    }
    if evaluated == 0 {
        return Err(HarnessError::AllPointsSkipped);
    }

    Ok(KmReport {
        requested: params.n_points,
        evaluated,
        skipped,
        min_entry,
        worst,
        tol: params.tol,
    })
}

//! The polyhedral cone `{x : P x >= 0}`, its partial order, and the
//! transform between density states `x` and cumulative states `z = P x`.
//!
//! Because `P` is nonnegative with unit diagonal, every componentwise
//! ordered pair is also cone ordered; the converse fails on any network
//! with a diverge, which is what makes the cone order strictly coarser
//! than the orthant order.

use crate::dynamics::{self, StateVector, ZVector};
use crate::network::{CumulativeMatrix, Network, NetworkError, RoutingMatrix};
use nalgebra::DVector;
use thiserror::Error;

/// Default absolute tolerance on entries of `P (x - y)` when comparing.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrderError {
    #[error("vector has {got} components, cone order expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    StateOutOfBox(#[from] dynamics::DynamicsError),
}

/// Outcome of a cone comparison. On incomparability, `above` and `below`
/// index one component of `P (x - y)` of each sign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderResult {
    Equal,
    GreaterEqual,
    LessEqual,
    Incomparable { above: usize, below: usize },
}

/// The cone order of a fixed network: owns `P`, `R`, the jam densities
/// (for box checks in `from_z`) and the comparison tolerance.
#[derive(Debug, Clone)]
pub struct ConeOrder {
    network: Network,
    routing: RoutingMatrix,
    cumulative: CumulativeMatrix,
    tol: f64,
}

impl ConeOrder {
    pub fn for_network(net: &Network) -> Result<Self, NetworkError> {
        let routing = net.routing_matrix();
        let cumulative = CumulativeMatrix::from_routing(&routing)?;
        Ok(ConeOrder {
            network: net.clone(),
            routing,
            cumulative,
            tol: DEFAULT_TOL,
        })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        assert!(tol >= 0.0, "comparison tolerance must be nonnegative");
        self.tol = tol;
        self
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn dim(&self) -> usize {
        self.cumulative.dim()
    }

    pub fn cumulative(&self) -> &CumulativeMatrix {
        &self.cumulative
    }

    pub fn routing(&self) -> &RoutingMatrix {
        &self.routing
    }

    fn check_dim(&self, len: usize) -> Result<(), OrderError> {
        if len != self.dim() {
            Err(OrderError::DimensionMismatch {
                expected: self.dim(),
                got: len,
            })
        } else {
            Ok(())
        }
    }

    /// Compares `x` and `y` in the cone order by the sign pattern of
    /// `u = P (x - y)` within the tolerance.
    pub fn compare(&self, x: &StateVector, y: &StateVector) -> Result<OrderResult, OrderError> {
        self.check_dim(x.len())?;
        self.check_dim(y.len())?;
        let u = self.cumulative.matrix() * (x.raw() - y.raw());
        let mut above = None;
        let mut below = None;
        for (idx, &value) in u.iter().enumerate() {
            if value > self.tol && above.is_none() {
                above = Some(idx);
            }
            if value < -self.tol && below.is_none() {
                below = Some(idx);
            }
        }
        Ok(match (above, below) {
            (None, None) => OrderResult::Equal,
            (Some(_), None) => OrderResult::GreaterEqual,
            (None, Some(_)) => OrderResult::LessEqual,
            (Some(a), Some(b)) => OrderResult::Incomparable { above: a, below: b },
        })
    }

    /// Margin vector `P (x - y)`; nonnegative entries mean `x` dominates.
    pub fn margin(&self, x: &StateVector, y: &StateVector) -> Result<DVector<f64>, OrderError> {
        self.check_dim(x.len())?;
        self.check_dim(y.len())?;
        Ok(self.cumulative.matrix() * (x.raw() - y.raw()))
    }

    /// `z = P x`.
    pub fn to_z(&self, x: &StateVector) -> ZVector {
        assert_eq!(x.len(), self.dim(), "state dimension mismatch");
        ZVector::from_raw(self.cumulative.matrix() * x.raw())
    }

    /// `x = (I - R) z`, validated against the state box.
    pub fn from_z(&self, z: &ZVector) -> Result<StateVector, OrderError> {
        self.check_dim(z.len())?;
        let x = dynamics::state_from_cumulative(&self.network, z.raw());
        let x = dynamics::clamp_into_box(&self.network, x)?;
        Ok(StateVector::from_raw(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Edge, NetworkSpec};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn chain2_order() -> ConeOrder {
        let net = Network::build(&NetworkSpec {
            n_cells: 2,
            root: 1,
            edges: vec![Edge::new(1, 2, 1.0)],
            jam_densities: vec![2.0, 2.0],
        })
        .unwrap();
        ConeOrder::for_network(&net).unwrap()
    }

    #[test]
    fn reflexive_equal() {
        let order = chain2_order();
        let x = StateVector::new(vec![0.7, 1.1]);
        assert_eq!(order.compare(&x, &x).unwrap(), OrderResult::Equal);
    }

    #[test]
    fn chain2_examples() {
        let order = chain2_order();
        // one vehicle upstream dominates the empty state: P(x-y) = (1, 1)
        let x = StateVector::new(vec![1.0, 0.0]);
        let y = StateVector::new(vec![0.0, 0.0]);
        assert_eq!(order.compare(&x, &y).unwrap(), OrderResult::GreaterEqual);

        // one vehicle downstream precedes one vehicle upstream: P(x-y) = (-1, 0)
        let x = StateVector::new(vec![0.0, 1.0]);
        let y = StateVector::new(vec![1.0, 0.0]);
        assert_eq!(order.compare(&x, &y).unwrap(), OrderResult::LessEqual);

        // mixed signs are incomparable, with witnesses of each sign
        let x = StateVector::new(vec![0.0, 1.0]);
        let y = StateVector::new(vec![0.5, 0.0]);
        assert_eq!(
            order.compare(&x, &y).unwrap(),
            OrderResult::Incomparable { above: 1, below: 0 }
        );
    }

    #[test]
    fn dimension_mismatch() {
        let order = chain2_order();
        let x = StateVector::new(vec![0.0, 1.0, 2.0]);
        let y = StateVector::new(vec![0.0, 1.0]);
        assert!(matches!(
            order.compare(&x, &y),
            Err(OrderError::DimensionMismatch {
                expected: 2,
                got: 3
            })
        ));
    }

    #[test]
    fn z_transform_examples() {
        let order = chain2_order();
        assert_eq!(order.to_z(&StateVector::zeros(2)).as_slice(), &[0.0, 0.0]);
        let z = order.to_z(&StateVector::new(vec![1.0, 1.0]));
        assert_eq!(z.as_slice(), &[1.0, 2.0]);
        let x = order.from_z(&ZVector::new(vec![1.0, 2.0])).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn example1_row7_path_products() {
        let setup = crate::harness::build_example1().unwrap();
        let order = ConeOrder::for_network(&setup.network).unwrap();
        let mut rng = StdRng::seed_from_u64(3);
        let x = StateVector::new(
            (0..10)
                .map(|e| rng.random_range(0.0..setup.network.jam_density(e)))
                .collect(),
        );
        let z = order.to_z(&x);
        let expected = x.component(6)
            + 0.5 * x.component(3)
            + (1.0 / 6.0) * x.component(1)
            + 0.15 * x.component(0);
        assert!((z.component(6) - expected).abs() <= 1e-12 * expected.max(1.0));
    }

    #[test]
    fn round_trip_random_states() {
        let setup = crate::harness::build_example1().unwrap();
        let order = ConeOrder::for_network(&setup.network).unwrap();
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..1000 {
            let x = StateVector::new(
                (0..10)
                    .map(|e| rng.random_range(0.0..setup.network.jam_density(e)))
                    .collect(),
            );
            let back = order.from_z(&order.to_z(&x)).unwrap();
            assert!((back.raw() - x.raw()).amax() <= 1e-12);
        }
    }

    #[test]
    fn from_z_rejects_states_far_outside_box() {
        let order = chain2_order();
        let z = ZVector::new(vec![-1.0, 0.0]);
        assert!(matches!(
            order.from_z(&z),
            Err(OrderError::StateOutOfBox(_))
        ));
    }

    #[test]
    fn orthant_pairs_are_cone_ordered() {
        let setup = crate::harness::build_example1().unwrap();
        let order = ConeOrder::for_network(&setup.network).unwrap();
        let mut rng = StdRng::seed_from_u64(29);
        for _ in 0..200 {
            let y = StateVector::new(
                (0..10)
                    .map(|e| rng.random_range(0.0..0.5 * setup.network.jam_density(e)))
                    .collect(),
            );
            let x = StateVector::new(
                (0..10)
                    .map(|e| {
                        y.component(e) + rng.random_range(0.0..0.4 * setup.network.jam_density(e))
                    })
                    .collect(),
            );
            let result = order.compare(&x, &y).unwrap();
            assert!(
                matches!(result, OrderResult::GreaterEqual | OrderResult::Equal),
                "componentwise-ordered pair must be cone ordered, got {result:?}"
            );
        }
    }

    #[test]
    fn cone_order_strictly_coarser_than_orthant() {
        // cone ordered but not componentwise ordered
        let order = chain2_order();
        let x = StateVector::new(vec![1.0, 0.0]);
        let y = StateVector::new(vec![0.0, 0.5]);
        assert_eq!(order.compare(&x, &y).unwrap(), OrderResult::GreaterEqual);
        assert!(x.component(1) < y.component(1));
    }

    #[test]
    fn transitivity_on_constructed_triples() {
        let setup = crate::harness::build_example1().unwrap();
        let order = ConeOrder::for_network(&setup.network).unwrap();
        let net = &setup.network;
        let mut rng = StdRng::seed_from_u64(31);
        let mut checked = 0;
        for seed in 0..200u64 {
            let x = StateVector::new(
                (0..10)
                    .map(|e| rng.random_range(0.3..0.7) * net.jam_density(e))
                    .collect(),
            );
            let (x, y) = crate::harness::generate_ordered_pair(net, &order, &x, seed);
            let (y, z) = crate::harness::generate_ordered_pair(net, &order, &y, seed + 1000);
            let xy = order.compare(&x, &y).unwrap();
            let yz = order.compare(&y, &z).unwrap();
            if xy != OrderResult::Equal && yz != OrderResult::Equal {
                checked += 1;
            }
            assert!(matches!(
                order.compare(&x, &z).unwrap(),
                OrderResult::GreaterEqual | OrderResult::Equal
            ));
        }
        assert!(checked > 50, "too many degenerate triples: {checked}");
    }

    #[test]
    fn positive_homogeneity() {
        let setup = crate::harness::build_example1().unwrap();
        let order = ConeOrder::for_network(&setup.network).unwrap();
        let net = &setup.network;
        let mut rng = StdRng::seed_from_u64(37);
        for seed in 0..100u64 {
            let x = StateVector::new(
                (0..10)
                    .map(|e| rng.random_range(0.3..0.7) * net.jam_density(e))
                    .collect(),
            );
            let (x, y) = crate::harness::generate_ordered_pair(net, &order, &x, seed);
            let lambda = rng.random_range(0.1..1.0);
            let sx = StateVector::from_raw(x.raw() * lambda);
            let sy = StateVector::from_raw(y.raw() * lambda);
            assert!(matches!(
                order.compare(&sx, &sy).unwrap(),
                OrderResult::GreaterEqual | OrderResult::Equal
            ));
        }
    }
}

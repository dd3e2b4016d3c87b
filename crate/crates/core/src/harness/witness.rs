//! Constructive counterexample to orthant monotonicity: jamming one
//! branch of a diverge starves its sibling, so raising a component of the
//! state can strictly decrease another cell's net inflow.

use super::HarnessError;
use crate::dynamics::{vector_field, StateVector};
use crate::fd::FdSet;
use crate::network::Network;

/// States `x <= y` (componentwise) with `x_i = y_i` at the starved sibling
/// `i`, yet `f_i(x) > f_i(y)`: the componentwise order is not preserved.
#[derive(Debug, Clone)]
pub struct OrthantWitness {
    pub x: StateVector,
    pub y: StateVector,
    /// Diverge cell whose outflow gets blocked (0-based).
    pub diverge: usize,
    /// Sibling with equal state in `x` and `y` whose inflow drops.
    pub starved: usize,
    /// Sibling raised to jam density in `y`.
    pub jammed: usize,
    pub f_starved_x: f64,
    pub f_starved_y: f64,
    /// `f_starved_x - f_starved_y`.
    pub margin: f64,
}

/// Builds the witness on the first diverge in topological order: `x` fills
/// the diverge cell to jam (maximal demand), `y` additionally jams one
/// downstream sibling, which blocks the whole diverge.
pub fn orthant_violation_witness(
    net: &Network,
    fds: &FdSet,
) -> Result<OrthantWitness, HarnessError> {
    let diverge = net
        .topological_order()
        .iter()
        .copied()
        .find(|&e| net.downstream(e).len() >= 2)
        .ok_or(HarnessError::NoDivergeInNetwork)?;
    let starved = net.downstream(diverge)[0].0;
    let jammed = net.downstream(diverge)[1].0;

    let mut x = vec![0.0; net.n_cells()];
    x[diverge] = net.jam_density(diverge);
    let mut y = x.clone();
    y[jammed] = net.jam_density(jammed);
    let x = StateVector::new(x);
    let y = StateVector::new(y);

    let f_x = vector_field(net, fds, &x, 0.0);
    let f_y = vector_field(net, fds, &y, 0.0);
    let f_starved_x = f_x[starved];
    let f_starved_y = f_y[starved];
    let margin = f_starved_x - f_starved_y;

    // Witness validity: componentwise ordered, equal at the starved
    // sibling, strictly larger field value on the smaller state.
    for e in 0..net.n_cells() {
        if x.component(e) > y.component(e) {
            return Err(HarnessError::SetupInvariantViolated(format!(
                "witness states not componentwise ordered at cell {}",
                e + 1
            )));
        }
    }
    debug_assert_eq!(x.component(starved), y.component(starved));
    if margin.is_nan() || margin <= 0.0 {
        return Err(HarnessError::SetupInvariantViolated(format!(
            "witness margin not positive: {margin} (degenerate diagrams?)"
        )));
    }

    Ok(OrthantWitness {
        x,
        y,
        diverge,
        starved,
        jammed,
        f_starved_x,
        f_starved_y,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Edge, NetworkSpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn example1_witness() {
        let setup = crate::harness::build_example1().unwrap();
        let witness = orthant_violation_witness(&setup.network, &setup.fds).unwrap();
        assert_eq!(witness.diverge, 0);
        assert_eq!(witness.starved, 1);
        assert_eq!(witness.jammed, 2);
        // blocked diverge: the starved sibling loses its whole inflow
        // 0.9 * min(F_1, s_2(0)/0.9, s_3(0)/0.1) = 0.9 * F_1 = 15000
        assert_abs_diff_eq!(witness.margin, 15000.0, epsilon = 1e-6);
        assert_eq!(witness.f_starved_y, 0.0);
        assert!(witness.margin >= 1e-3 * setup.fds.capacity_scale());
    }

    #[test]
    fn manual_free_flow_state_also_witnesses() {
        // same blocking mechanism from a root density with demand exactly
        // at capacity instead of at jam
        let setup = crate::harness::build_example1().unwrap();
        let f1 = setup.capacities[0];
        let mut x = vec![0.0; 10];
        x[0] = f1 / 100.0; // demand(x_1) = F_1
        let mut y = x.clone();
        y[2] = setup.network.jam_density(2);
        let fx = vector_field(
            &setup.network,
            &setup.fds,
            &StateVector::new(x.clone()),
            0.0,
        );
        let fy = vector_field(
            &setup.network,
            &setup.fds,
            &StateVector::new(y.clone()),
            0.0,
        );
        assert!(x.iter().zip(&y).all(|(a, b)| a <= b));
        assert_eq!(x[1], y[1]);
        assert_abs_diff_eq!(fx[1] - fy[1], 0.9 * f1, epsilon = 1e-6);
    }

    #[test]
    fn chain_has_no_diverge() {
        use crate::fd::{FdSet, FundamentalDiagram, PiecewiseAffineFd};
        use std::sync::Arc;
        let net = Network::build(&NetworkSpec {
            n_cells: 2,
            root: 1,
            edges: vec![Edge::new(1, 2, 1.0)],
            jam_densities: vec![2.0, 2.0],
        })
        .unwrap();
        let fd = || -> Arc<dyn FundamentalDiagram> {
            Arc::new(PiecewiseAffineFd::tight(1.0, 1.0, 1.0).unwrap())
        };
        let fds = FdSet::new(&net, vec![fd(), fd()]).unwrap();
        assert!(matches!(
            orthant_violation_witness(&net, &fds),
            Err(HarnessError::NoDivergeInNetwork)
        ));
    }
}

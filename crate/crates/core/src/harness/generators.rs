//! Random model generators for randomized verification: trees with
//! bounded branching, substochastic turning rates, and well-formed
//! trapezoidal diagrams.

use crate::fd::{FdSet, FundamentalDiagram, PiecewiseAffineFd};
use crate::network::{Edge, Network, NetworkSpec};
use rand::Rng;
use std::sync::Arc;

/// Keep diverges at realistic sizes; also bounds the inverse turning
/// rates, which keeps the dynamics comfortably integrable at fixed steps.
const MAX_CHILDREN: usize = 4;

/// A randomly drawn tree network with matching trapezoidal diagrams.
#[derive(Debug, Clone)]
pub struct RandomModel {
    pub spec: NetworkSpec,
    pub network: Network,
    pub fds: FdSet,
}

/// Draws a rooted tree with `2..=max_cells` cells (parents always precede
/// children, so cell 1 is the root), outgoing rate sums in `[0.6, 1.0]`,
/// and per-cell trapezoids with slopes and capacities in `[0.5, 2.0]`.
pub fn random_model<R: Rng + ?Sized>(rng: &mut R, max_cells: usize) -> RandomModel {
    assert!(max_cells >= 2);
    let n = rng.random_range(2..=max_cells);

    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for cell in 2..=n {
        let candidates: Vec<usize> = (1..cell)
            .filter(|&p| children[p].len() < MAX_CHILDREN)
            .collect();
        let parent = candidates[rng.random_range(0..candidates.len())];
        children[parent].push(cell);
    }

    let mut edges = Vec::with_capacity(n - 1);
    for (parent, kids) in children.iter().enumerate().skip(1) {
        if kids.is_empty() {
            continue;
        }
        let weights: Vec<f64> = kids.iter().map(|_| rng.random_range(0.5..1.0)).collect();
        let total: f64 = weights.iter().sum();
        let routed = rng.random_range(0.6..1.0);
        for (&child, &weight) in kids.iter().zip(&weights) {
            edges.push(Edge::new(parent, child, routed * weight / total));
        }
    }

    let mut jam = Vec::with_capacity(n);
    let mut fds: Vec<Arc<dyn FundamentalDiagram>> = Vec::with_capacity(n);
    for _ in 0..n {
        let v = rng.random_range(0.5..2.0);
        let w = rng.random_range(0.5..2.0);
        let capacity = rng.random_range(0.5..2.0);
        let jam_density = (capacity / v + capacity / w) * (1.0 + rng.random_range(0.0..0.5));
        jam.push(jam_density);
        fds.push(Arc::new(
            PiecewiseAffineFd::new(v, w, capacity, jam_density)
                .expect("drawn parameters are valid"),
        ));
    }

    let spec = NetworkSpec {
        n_cells: n,
        root: 1,
        edges,
        jam_densities: jam,
    };
    let network = Network::build(&spec).expect("generated specs are valid trees");
    let fds = FdSet::new(&network, fds).expect("jam densities match by construction");

    RandomModel { spec, network, fds }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn generated_models_are_valid() {
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..100 {
            let model = random_model(&mut rng, 20);
            let n = model.network.n_cells();
            assert!((2..=20).contains(&n));
            for e in 0..n {
                assert!(model.network.downstream(e).len() <= MAX_CHILDREN);
                let routed: f64 = model.network.downstream(e).iter().map(|&(_, b)| b).sum();
                assert!(routed <= 1.0 + 1e-12);
                for &(_, rate) in model.network.downstream(e) {
                    assert!(rate > 0.0 && rate <= 1.0);
                }
            }
            // integrable at dt = 1e-4 under the stability guard
            assert!(model.fds.global_lipschitz() <= 2.0);
        }
    }
}

//! Fundamental diagrams: per-cell demand and supply functions.
//!
//! Demand models the flow a cell offers downstream (nondecreasing,
//! `d(0) = 0`), supply the inflow it still accepts (nonincreasing,
//! `s(jam) = 0`). The built-in family is the piecewise-affine trapezoid
//! `d(x) = min(v x, F)`, `s(x) = min(F, w (jam - x))`.

use crate::network::Network;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FdError {
    #[error("fundamental diagram parameter {name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("degenerate trapezoid: jam density {jam} below critical span {span}")]
    DegenerateTrapezoid { jam: f64, span: f64 },
    #[error("expected one diagram per cell ({expected}), got {got}")]
    CellCountMismatch { expected: usize, got: usize },
    #[error("jam density of cell {cell} disagrees with the network: {fd} vs {network}")]
    JamMismatch { cell: usize, fd: f64, network: f64 },
}

/// Evaluation contract for a cell's demand/supply pair.
///
/// Inputs outside `[0, jam]` are clamped, so evaluation is total; the
/// integrator may overshoot the state box by a step-sized margin.
pub trait FundamentalDiagram: Send + Sync {
    fn demand(&self, x: f64) -> f64;
    fn supply(&self, x: f64) -> f64;
    fn jam_density(&self) -> f64;
    /// Upper bound on both demand and supply values.
    fn capacity(&self) -> f64;
    fn demand_lipschitz(&self) -> f64;
    fn supply_lipschitz(&self) -> f64;
    /// Interior densities where the diagram is not differentiable.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Trapezoidal diagram: free-flow slope `v`, congestion-wave slope `w`,
/// capacity `F`, jam density `jam >= F/v + F/w`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseAffineFd {
    free_flow_speed: f64,
    wave_speed: f64,
    capacity: f64,
    jam: f64,
}

impl PiecewiseAffineFd {
    pub fn new(
        free_flow_speed: f64,
        wave_speed: f64,
        capacity: f64,
        jam: f64,
    ) -> Result<Self, FdError> {
        let check = |name: &'static str, value: f64| {
            if value > 0.0 {
                Ok(())
            } else {
                Err(FdError::NonPositiveParameter { name, value })
            }
        };
        check("free_flow_speed", free_flow_speed)?;
        check("wave_speed", wave_speed)?;
        check("capacity", capacity)?;
        check("jam_density", jam)?;
        let span = capacity / free_flow_speed + capacity / wave_speed;
        if jam < span * (1.0 - 1e-12) {
            return Err(FdError::DegenerateTrapezoid { jam, span });
        }
        Ok(PiecewiseAffineFd {
            free_flow_speed,
            wave_speed,
            capacity,
            jam,
        })
    }

    /// Tight trapezoid with `jam = F/v + F/w`: the critical density and the
    /// supply cutoff coincide, so every cell is congestible.
    pub fn tight(free_flow_speed: f64, wave_speed: f64, capacity: f64) -> Result<Self, FdError> {
        let jam = capacity / free_flow_speed + capacity / wave_speed;
        Self::new(free_flow_speed, wave_speed, capacity, jam)
    }

    pub fn free_flow_speed(&self) -> f64 {
        self.free_flow_speed
    }

    pub fn wave_speed(&self) -> f64 {
        self.wave_speed
    }
}

impl FundamentalDiagram for PiecewiseAffineFd {
    fn demand(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, self.jam);
        (self.free_flow_speed * x).min(self.capacity)
    }

    fn supply(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, self.jam);
        (self.wave_speed * (self.jam - x)).min(self.capacity)
    }

    fn jam_density(&self) -> f64 {
        self.jam
    }

    fn capacity(&self) -> f64 {
        self.capacity
    }

    fn demand_lipschitz(&self) -> f64 {
        self.free_flow_speed
    }

    fn supply_lipschitz(&self) -> f64 {
        self.wave_speed
    }

    fn breakpoints(&self) -> Vec<f64> {
        let critical = self.capacity / self.free_flow_speed;
        let cutoff = self.jam - self.capacity / self.wave_speed;
        if (critical - cutoff).abs() <= 1e-12 * self.jam {
            vec![critical]
        } else {
            vec![critical, cutoff]
        }
    }
}

/// One fundamental diagram per cell.
#[derive(Clone)]
pub struct FdSet {
    fds: Vec<Arc<dyn FundamentalDiagram>>,
}

impl FdSet {
    /// Checks the diagram count and that jam densities agree with the
    /// network (relative tolerance 1e-9).
    pub fn new(net: &Network, fds: Vec<Arc<dyn FundamentalDiagram>>) -> Result<Self, FdError> {
        if fds.len() != net.n_cells() {
            return Err(FdError::CellCountMismatch {
                expected: net.n_cells(),
                got: fds.len(),
            });
        }
        for (e, fd) in fds.iter().enumerate() {
            let net_jam = net.jam_density(e);
            if (fd.jam_density() - net_jam).abs() > 1e-9 * net_jam.max(1.0) {
                return Err(FdError::JamMismatch {
                    cell: e + 1,
                    fd: fd.jam_density(),
                    network: net_jam,
                });
            }
        }
        Ok(FdSet { fds })
    }

    pub fn fd(&self, e: usize) -> &dyn FundamentalDiagram {
        self.fds[e].as_ref()
    }

    pub fn len(&self) -> usize {
        self.fds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fds.is_empty()
    }

    /// `L = max_e max(v_e, w_e)`: Lipschitz bound shared by all diagrams.
    pub fn global_lipschitz(&self) -> f64 {
        self.fds
            .iter()
            .map(|fd| fd.demand_lipschitz().max(fd.supply_lipschitz()))
            .fold(0.0, f64::max)
    }

    /// Largest capacity; the flow scale of the network.
    pub fn capacity_scale(&self) -> f64 {
        self.fds.iter().map(|fd| fd.capacity()).fold(0.0, f64::max)
    }
}

impl std::fmt::Debug for FdSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FdSet")
            .field("len", &self.fds.len())
            .finish()
    }
}

/// What `check_assumption1` found wrong, if anything.
#[derive(Debug, Clone, PartialEq)]
pub enum Assumption1Violation {
    DemandAtZero {
        value: f64,
    },
    SupplyAtJam {
        value: f64,
    },
    NegativeDemand {
        x: f64,
        value: f64,
    },
    NegativeSupply {
        x: f64,
        value: f64,
    },
    DemandDecreasing {
        x0: f64,
        x1: f64,
    },
    SupplyIncreasing {
        x0: f64,
        x1: f64,
    },
    DemandLipschitzExceeded {
        x0: f64,
        x1: f64,
        ratio: f64,
    },
    SupplyLipschitzExceeded {
        x0: f64,
        x1: f64,
        ratio: f64,
    },
    /// Demand and supply never both reach the declared capacity: the
    /// diagram's trapezoid is degenerate.
    DegenerateShape {
        max_min_flow: f64,
        capacity: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption1Report {
    pub pass: bool,
    pub first_violation: Option<Assumption1Violation>,
    pub samples: usize,
}

/// Samples a diagram on a uniform grid of `[0, jam]` and checks the shape
/// assumptions: `d(0) = 0`, `s(jam) = 0`, monotonicity, declared Lipschitz
/// bounds, nonnegativity, and trapezoid well-formedness. Violations are
/// reported, not thrown.
pub fn check_assumption1(fd: &dyn FundamentalDiagram, n_samples: usize) -> Assumption1Report {
    assert!(n_samples >= 2, "need at least two samples");
    let jam = fd.jam_density();
    let grid: Vec<f64> = (0..n_samples)
        .map(|k| jam * k as f64 / (n_samples - 1) as f64)
        .collect();

    let fail = |v: Assumption1Violation| Assumption1Report {
        pass: false,
        first_violation: Some(v),
        samples: n_samples,
    };

    let d0 = fd.demand(0.0);
    if d0 != 0.0 {
        return fail(Assumption1Violation::DemandAtZero { value: d0 });
    }
    let sj = fd.supply(jam);
    if sj != 0.0 {
        return fail(Assumption1Violation::SupplyAtJam { value: sj });
    }

    let lip_slack = 1.0 + 1e-9;
    let ld = fd.demand_lipschitz() * lip_slack;
    let ls = fd.supply_lipschitz() * lip_slack;
    let mut max_min_flow: f64 = 0.0;
    for k in 0..n_samples {
        let x = grid[k];
        let d = fd.demand(x);
        let s = fd.supply(x);
        if d < 0.0 {
            return fail(Assumption1Violation::NegativeDemand { x, value: d });
        }
        if s < 0.0 {
            return fail(Assumption1Violation::NegativeSupply { x, value: s });
        }
        max_min_flow = max_min_flow.max(d.min(s));
        if k > 0 {
            let x0 = grid[k - 1];
            let h = x - x0;
            let d_prev = fd.demand(x0);
            let s_prev = fd.supply(x0);
            if d < d_prev {
                return fail(Assumption1Violation::DemandDecreasing { x0, x1: x });
            }
            if s > s_prev {
                return fail(Assumption1Violation::SupplyIncreasing { x0, x1: x });
            }
            if (d - d_prev).abs() > ld * h {
                return fail(Assumption1Violation::DemandLipschitzExceeded {
                    x0,
                    x1: x,
                    ratio: (d - d_prev).abs() / h,
                });
            }
            if (s - s_prev).abs() > ls * h {
                return fail(Assumption1Violation::SupplyLipschitzExceeded {
                    x0,
                    x1: x,
                    ratio: (s - s_prev).abs() / h,
                });
            }
        }
    }

    // Well-formed diagrams admit a density where both demand and supply sit
    // at capacity; allow for the grid missing the plateau by one cell.
    let grid_slack =
        fd.demand_lipschitz().max(fd.supply_lipschitz()) * jam / (n_samples - 1) as f64;
    if max_min_flow + grid_slack < fd.capacity() {
        return fail(Assumption1Violation::DegenerateShape {
            max_min_flow,
            capacity: fd.capacity(),
        });
    }

    Assumption1Report {
        pass: true,
        first_violation: None,
        samples: n_samples,
    }
}

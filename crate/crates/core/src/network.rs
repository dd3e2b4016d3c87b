//! Rooted directed trees of cells, the routing matrix `R` and the
//! cumulative matrix `P = (I - R)^-1`.
//!
//! Cells are identified by dense 1-based ids in [`NetworkSpec`] (matching
//! configuration files and reports) and by 0-based indices everywhere else
//! in the crate. An edge `(from, to, rate)` routes the fraction `rate` of
//! the outflow of cell `from` into cell `to`.

use nalgebra::DMatrix;
use thiserror::Error;

/// Slack allowed on outgoing turning-rate sums, so rates entered as `1/3`
/// in binary floating point still sum to one.
pub const COLUMN_SUM_TOL: f64 = 1e-12;

/// One directed connection between two cells of the line graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    /// Upstream cell id (1-based).
    pub from: usize,
    /// Downstream cell id (1-based).
    pub to: usize,
    /// Turning rate: fraction of the upstream outflow routed here, in (0, 1].
    pub rate: f64,
}

impl Edge {
    pub fn new(from: usize, to: usize, rate: f64) -> Self {
        Edge { from, to, rate }
    }
}

/// Raw description of a cell network, as read from a configuration file.
///
/// Cells are implicitly numbered `1..=n_cells`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub n_cells: usize,
    /// Id of the unique cell originating at the root vertex.
    pub root: usize,
    pub edges: Vec<Edge>,
    /// Jam density per cell, indexed by cell id - 1.
    pub jam_densities: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("network must contain at least one cell")]
    EmptyNetwork,
    #[error("cell id {cell} out of range 1..={n_cells}")]
    UnknownCell { cell: usize, n_cells: usize },
    #[error("turning rate on edge {from}->{to} must be positive, got {rate}")]
    NonPositiveTurningRate { from: usize, to: usize, rate: f64 },
    #[error("outgoing turning rates of cell {cell} sum to {sum}, exceeding 1")]
    ColumnSumExceeded { cell: usize, sum: f64 },
    #[error("cell {cell} has more than one upstream cell")]
    MultipleUpstream { cell: usize },
    #[error("cycle detected through cell {cell}")]
    CycleDetected { cell: usize },
    #[error("cell {cell} is not reachable from the root")]
    DisconnectedCell { cell: usize },
    #[error("expected {expected} jam densities, got {got}")]
    JamDensityCount { expected: usize, got: usize },
    #[error("jam density of cell {cell} must be positive, got {value}")]
    NonPositiveJamDensity { cell: usize, value: f64 },
    #[error("Neumann series did not terminate: routing matrix is not nilpotent")]
    NotNilpotent,
}

/// Validated rooted directed tree of cells.
///
/// All indices in the public API are 0-based; `cell_id` converts back to
/// the 1-based ids used in [`NetworkSpec`].
#[derive(Debug, Clone)]
pub struct Network {
    n: usize,
    root: usize,
    /// For each non-root cell `e`: `(e_plus, rate)` with `e_plus` the unique
    /// upstream cell and `rate` the turning rate into `e`.
    upstream: Vec<Option<(usize, f64)>>,
    /// For each cell `e`: downstream cells `i` with their rates `beta[i,e]`.
    downstream: Vec<Vec<(usize, f64)>>,
    /// Breadth-first order from the root; parents precede children.
    topo_order: Vec<usize>,
    jam: Vec<f64>,
}

impl Network {
    /// Validates a spec and builds the network (upstream map, downstream
    /// sets, topological order).
    pub fn build(spec: &NetworkSpec) -> Result<Self, NetworkError> {
        let n = spec.n_cells;
        if n == 0 {
            return Err(NetworkError::EmptyNetwork);
        }
        let check_id = |cell: usize| -> Result<usize, NetworkError> {
            if cell == 0 || cell > n {
                Err(NetworkError::UnknownCell { cell, n_cells: n })
            } else {
                Ok(cell - 1)
            }
        };
        let root = check_id(spec.root)?;

        if spec.jam_densities.len() != n {
            return Err(NetworkError::JamDensityCount {
                expected: n,
                got: spec.jam_densities.len(),
            });
        }
        for (idx, &jam) in spec.jam_densities.iter().enumerate() {
            if !jam.is_finite() || jam <= 0.0 {
                return Err(NetworkError::NonPositiveJamDensity {
                    cell: idx + 1,
                    value: jam,
                });
            }
        }

        let mut upstream: Vec<Option<(usize, f64)>> = vec![None; n];
        let mut downstream: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for edge in &spec.edges {
            let from = check_id(edge.from)?;
            let to = check_id(edge.to)?;
            if !edge.rate.is_finite() || edge.rate <= 0.0 {
                return Err(NetworkError::NonPositiveTurningRate {
                    from: edge.from,
                    to: edge.to,
                    rate: edge.rate,
                });
            }
            if upstream[to].is_some() {
                return Err(NetworkError::MultipleUpstream { cell: edge.to });
            }
            upstream[to] = Some((from, edge.rate));
            downstream[from].push((to, edge.rate));
        }
        for lst in &mut downstream {
            lst.sort_by_key(|&(i, _)| i);
        }

        for (e, lst) in downstream.iter().enumerate() {
            let sum: f64 = lst.iter().map(|&(_, b)| b).sum();
            if sum > 1.0 + COLUMN_SUM_TOL {
                return Err(NetworkError::ColumnSumExceeded { cell: e + 1, sum });
            }
        }

        // Breadth-first traversal from the root. Every cell has at most one
        // upstream cell, so revisiting a cell means an edge closes a cycle
        // back into the visited set.
        let mut visited = vec![false; n];
        let mut topo_order = Vec::with_capacity(n);
        let mut queue = std::collections::VecDeque::new();
        visited[root] = true;
        queue.push_back(root);
        while let Some(e) = queue.pop_front() {
            topo_order.push(e);
            for &(i, _) in &downstream[e] {
                if visited[i] {
                    return Err(NetworkError::CycleDetected { cell: i + 1 });
                }
                visited[i] = true;
                queue.push_back(i);
            }
        }
        if let Some(e) = visited.iter().position(|&v| !v) {
            return Err(NetworkError::DisconnectedCell { cell: e + 1 });
        }

        Ok(Network {
            n,
            root,
            upstream,
            downstream,
            topo_order,
            jam: spec.jam_densities.clone(),
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n
    }

    /// Index of the cell originating at the root vertex.
    pub fn root(&self) -> usize {
        self.root
    }

    /// Unique upstream cell and turning rate of `e`, `None` for the root.
    pub fn upstream(&self, e: usize) -> Option<(usize, f64)> {
        self.upstream[e]
    }

    /// Downstream cells `i` of `e` with their turning rates `beta[i,e]`.
    pub fn downstream(&self, e: usize) -> &[(usize, f64)] {
        &self.downstream[e]
    }

    /// True when cell `e` terminates at a sink vertex.
    pub fn is_sink(&self, e: usize) -> bool {
        self.downstream[e].is_empty()
    }

    /// True when some cell has two or more downstream cells.
    pub fn has_diverge(&self) -> bool {
        self.downstream.iter().any(|d| d.len() >= 2)
    }

    /// Cell indices in breadth-first order starting at the root.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo_order
    }

    pub fn jam_density(&self, e: usize) -> f64 {
        self.jam[e]
    }

    pub fn jam_densities(&self) -> &[f64] {
        &self.jam
    }

    /// Largest jam density; the density scale of the network.
    pub fn jam_scale(&self) -> f64 {
        self.jam.iter().cloned().fold(0.0, f64::max)
    }

    /// 1-based id of a cell index, for reports and file formats.
    pub fn cell_id(&self, idx: usize) -> usize {
        idx + 1
    }

    /// Routing matrix `R` with `R[i, e] = beta[i, e]` on edges, 0 elsewhere.
    pub fn routing_matrix(&self) -> RoutingMatrix {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (e, lst) in self.downstream.iter().enumerate() {
            for &(i, rate) in lst {
                m[(i, e)] = rate;
            }
        }
        RoutingMatrix { m }
    }
}

/// Column-substochastic matrix of turning rates; nilpotent on trees.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingMatrix {
    pub(crate) m: DMatrix<f64>,
}

impl RoutingMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }
}

/// `P = (I - R)^-1 = sum_k R^k`, computed by the terminating Neumann
/// series. Entry `P[e, i]` is the product of turning rates along the path
/// from cell `i` down to cell `e` when `i` is an ancestor of `e`, 1 on the
/// diagonal, and 0 otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeMatrix {
    pub(crate) m: DMatrix<f64>,
}

impl CumulativeMatrix {
    /// Sums the Neumann series `I + R + R^2 + ...`, which terminates after
    /// at most `n` terms on a tree. Errors if the series has not vanished
    /// by then (a cycle slipped past validation).
    pub fn from_routing(r: &RoutingMatrix) -> Result<Self, NetworkError> {
        let n = r.dim();
        let mut p = DMatrix::identity(n, n);
        let mut term = DMatrix::identity(n, n);
        for _ in 1..n {
            term *= &r.m;
            if term.amax() == 0.0 {
                return Ok(CumulativeMatrix { m: p });
            }
            p += &term;
        }
        term *= &r.m;
        if term.amax() == 0.0 {
            Ok(CumulativeMatrix { m: p })
        } else {
            Err(NetworkError::NotNilpotent)
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn entry(&self, e: usize, i: usize) -> f64 {
        self.m[(e, i)]
    }
}

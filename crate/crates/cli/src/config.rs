//! Configuration files: strict TOML with sections for the network, the
//! fundamental diagrams, the integrator, the external demand, and the
//! experiment to run. Unknown keys are rejected so a typo in a tolerance
//! name cannot silently invalidate a verification run.

use fifo_sim_core::fd::{FdSet, FundamentalDiagram, PiecewiseAffineFd};
use fifo_sim_core::harness;
use fifo_sim_core::network::{Edge, Network, NetworkSpec};
use fifo_sim_core::sim::{DemandSchedule, Method, SimConfig};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Scalar applied to every cell, or one value per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerCell {
    Uniform(f64),
    Each(Vec<f64>),
}

impl PerCell {
    fn resolve(&self, n: usize, key: &str) -> Result<Vec<f64>, ConfigError> {
        match self {
            PerCell::Uniform(v) => Ok(vec![*v; n]),
            PerCell::Each(values) => {
                if values.len() != n {
                    Err(err(format!(
                        "key `{key}`: expected {n} per-cell values, got {}",
                        values.len()
                    )))
                } else {
                    Ok(values.clone())
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRow {
    pub from: usize,
    pub to: usize,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    /// Number of cells; ids are 1..=cells.
    pub cells: usize,
    pub root: usize,
    pub edges: Vec<EdgeRow>,
    pub jam_densities: PerCell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdSection {
    pub v: PerCell,
    pub w: PerCell,
    pub capacity: PerCell,
}

fn default_dt() -> f64 {
    1e-4
}

fn default_horizon() -> f64 {
    1.0
}

fn default_method() -> String {
    "rk4".to_string()
}

fn default_record_every() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// `rk4` or `euler`.
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            dt: default_dt(),
            horizon: default_horizon(),
            method: default_method(),
            record_every: default_record_every(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSection {
    /// Piecewise-constant `(time, value)` rows; each value applies from its
    /// time onward. Empty means no external demand.
    #[serde(default)]
    pub table: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Example1,
    PropertyTest,
    KmCheck,
    OrthantWitness,
    CumulativeCheck,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Example1 => "example1",
            ExperimentKind::PropertyTest => "property-test",
            ExperimentKind::KmCheck => "km-check",
            ExperimentKind::OrthantWitness => "orthant-witness",
            ExperimentKind::CumulativeCheck => "cumulative-check",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    /// Initial densities (simulate, cumulative-check).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Also export the cumulative-coordinate trajectory (simulate).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub write_z: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Number of random ordered pairs (property-test).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_pairs: Option<usize>,
    /// Order tolerance relative to each pair's cumulative-state scale
    /// (property-test, cumulative-check).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_rel: Option<f64>,
    /// Number of sample points (km-check).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
    /// Finite-difference step relative to the largest jam density (km-check).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_rel: Option<f64>,
    /// External demand held fixed during the check (km-check).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_demand: Option<f64>,
    /// Drain threshold relative to the largest jam density (cumulative-check).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_empty_rel: Option<f64>,
    /// Required witness margin relative to the largest capacity
    /// (orthant-witness).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin_rel: Option<f64>,
}

impl ExperimentSection {
    pub fn bare(kind: ExperimentKind) -> Self {
        ExperimentSection {
            kind,
            x0: None,
            write_z: None,
            seed: None,
            n_pairs: None,
            tol_rel: None,
            n_points: None,
            step_rel: None,
            external_demand: None,
            eps_empty_rel: None,
            margin_rel: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub network: NetworkSection,
    pub fd: FdSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub demand: DemandSection,
    pub experiment: ExperimentSection,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config files serialize")
    }

    /// The built-in ten-cell reference configuration, generated from the
    /// harness setup so the capacity derivation stays in code under test.
    pub fn example1() -> Self {
        let setup = harness::build_example1().expect("built-in setup is valid");
        let net = &setup.network;
        let mut edges = Vec::new();
        for e in 0..net.n_cells() {
            for &(i, rate) in net.downstream(e) {
                edges.push(EdgeRow {
                    from: net.cell_id(e),
                    to: net.cell_id(i),
                    beta: rate,
                });
            }
        }
        edges.sort_by_key(|row| (row.from, row.to));
        ConfigFile {
            network: NetworkSection {
                cells: net.n_cells(),
                root: net.cell_id(net.root()),
                edges,
                jam_densities: PerCell::Each(net.jam_densities().to_vec()),
            },
            fd: FdSection {
                v: PerCell::Uniform(harness::example1::FREE_FLOW_SPEED),
                w: PerCell::Uniform(harness::example1::WAVE_SPEED),
                capacity: PerCell::Each(setup.capacities.clone()),
            },
            sim: SimSection::default(),
            demand: DemandSection::default(),
            experiment: ExperimentSection::bare(ExperimentKind::Example1),
        }
    }

    /// Builds the validated model: network, diagrams, integrator config.
    pub fn build_model(&self) -> Result<Model, ConfigError> {
        let n = self.network.cells;
        let jam = self
            .network
            .jam_densities
            .resolve(n, "network.jam_densities")?;
        let spec = NetworkSpec {
            n_cells: n,
            root: self.network.root,
            edges: self
                .network
                .edges
                .iter()
                .map(|row| Edge::new(row.from, row.to, row.beta))
                .collect(),
            jam_densities: jam.clone(),
        };
        let network = Network::build(&spec).map_err(|e| err(format!("key `network`: {e}")))?;

        let v = self.fd.v.resolve(n, "fd.v")?;
        let w = self.fd.w.resolve(n, "fd.w")?;
        let capacity = self.fd.capacity.resolve(n, "fd.capacity")?;
        let mut diagrams: Vec<Arc<dyn FundamentalDiagram>> = Vec::with_capacity(n);
        for e in 0..n {
            diagrams.push(Arc::new(
                PiecewiseAffineFd::new(v[e], w[e], capacity[e], jam[e])
                    .map_err(|error| err(format!("key `fd`, cell {}: {error}", e + 1)))?,
            ));
        }
        let fds = FdSet::new(&network, diagrams).map_err(|e| err(format!("key `fd`: {e}")))?;

        let method = match self.sim.method.as_str() {
            "rk4" => Method::Rk4,
            "euler" => Method::ExplicitEuler,
            other => {
                return Err(err(format!(
                    "key `sim.method`: unknown method `{other}` (expected `rk4` or `euler`)"
                )))
            }
        };
        let demand = DemandSchedule::new(self.demand.table.clone())
            .map_err(|e| err(format!("key `demand.table`: {e}")))?;
        let sim = SimConfig::new(self.sim.dt, self.sim.horizon)
            .with_method(method)
            .with_record_every(self.sim.record_every)
            .with_demand(demand);

        Ok(Model { network, fds, sim })
    }
}

/// A validated configuration, ready to run.
#[derive(Debug)]
pub struct Model {
    pub network: Network,
    pub fds: FdSet,
    pub sim: SimConfig,
}

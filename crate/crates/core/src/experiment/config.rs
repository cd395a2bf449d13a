//! TOML experiment files.
//!
//! ```toml
//! tolls = "both"            # "on" | "off" | "both"
//!
//! [network]
//! edges = 2
//! degrees = [0, 2]
//! demand = 1.0
//!
//! [coefficients]
//! edge1.d0 = { low = 0.0, high = 60.0 }
//! edge1.d2 = 1.0
//! edge2.d0 = 1.0
//! edge2.d2 = { low = 0.0, high = 60.0 }
//!
//! [prior]
//! kind = "truncated-gaussian"
//! mean = [30.0, 30.0]
//! covariance = [[360.0, 180.0], [180.0, 360.0]]
//!
//! [policy]
//! sweep = { min = 1, max = 12 }
//!
//! [monte_carlo]
//! seed = 42
//! samples = 1000000
//! ```
//!
//! Edges are numbered from 1. Coefficients not listed are zero. A `{ low,
//! high }` entry makes a coefficient random; prior parameters (mean,
//! covariance rows, atom values, policy box corners) list the random
//! coefficients in the order they are declared in the file.

use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::belief::{
    Atom, BoxSupport, Cell, Coordinate, MonteCarloConfig, Prior, SignallingPolicy,
};
use crate::error::{Error, Result};
use crate::game::{Coefficients, DegreeSet, Network};
use crate::solver::SolverConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub tolls: TollMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub network: NetworkSpec,
    #[serde(default)]
    pub coefficients: IndexMap<String, IndexMap<String, CoefficientSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSpec>,
    #[serde(default)]
    pub policy: PolicySpec,
    #[serde(default)]
    pub monte_carlo: MonteCarloConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub edges: usize,
    pub degrees: Vec<u32>,
    #[serde(default = "unit_demand")]
    pub demand: f64,
}

fn unit_demand() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientSpec {
    Fixed(f64),
    Random { low: f64, high: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PriorSpec {
    Uniform,
    Discrete {
        atoms: Vec<AtomSpec>,
    },
    TruncatedGaussian {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub values: Vec<f64>,
    pub probability: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub granularity: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<Vec<BoxSpec>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRange {
    pub min: usize,
    pub max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TollMode {
    On,
    Off,
    #[default]
    Both,
}

impl TollMode {
    pub fn untolled(self) -> bool {
        matches!(self, TollMode::Off | TollMode::Both)
    }

    pub fn tolled(self) -> bool {
        matches!(self, TollMode::On | TollMode::Both)
    }
}

/// Which policies a run evaluates.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicyChoice {
    /// Uniform grids for each granularity in the range.
    Grids(Vec<usize>),
    /// One explicit partition.
    Boxes(SignallingPolicy),
}

/// A validated experiment.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub network: Network,
    pub prior: Prior,
    pub policy: PolicyChoice,
    pub tolls: TollMode,
    pub monte_carlo: MonteCarloConfig,
    pub solver: SolverConfig,
    pub output: Option<PathBuf>,
}

const DEFAULT_SWEEP: SweepRange = SweepRange { min: 1, max: 12 };

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        ExperimentConfig::from_toml(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Random coefficients in declaration order.
    fn declared_random(&self, network: &Network) -> Result<Vec<Coordinate>> {
        let mut out = Vec::new();
        for (edge_key, row) in &self.coefficients {
            for (degree_key, spec) in row {
                if matches!(spec, CoefficientSpec::Random { .. }) {
                    out.push(parse_slot(network, edge_key, degree_key)?);
                }
            }
        }
        Ok(out)
    }

    pub fn build(&self) -> Result<Experiment> {
        let degrees = DegreeSet::new(self.network.degrees.clone())
            .map_err(|e| Error::config("network.degrees", e.to_string()))?;
        let network = Network::new(self.network.edges, degrees, self.network.demand)
            .map_err(|e| Error::config("network", e.to_string()))?;
        self.solver
            .validate()
            .map_err(|e| Error::config("solver", e.to_string()))?;
        if self.monte_carlo.samples == 0 {
            return Err(Error::config("monte_carlo.samples", "must be positive"));
        }

        let mut low = Coefficients::zeros(&network);
        let mut high = Coefficients::zeros(&network);
        let mut seen = std::collections::HashSet::new();
        for (edge_key, row) in &self.coefficients {
            for (degree_key, spec) in row {
                let field = format!("coefficients.{edge_key}.{degree_key}");
                let c = parse_slot(&network, edge_key, degree_key)?;
                if !seen.insert(c) {
                    return Err(Error::config(field, "declared twice"));
                }
                let (l, h) = match *spec {
                    CoefficientSpec::Fixed(v) => (v, v),
                    CoefficientSpec::Random { low, high } => {
                        if !(low < high) {
                            return Err(Error::config(
                                field,
                                format!("need low < high, got {{{low}, {high}}}"),
                            ));
                        }
                        (low, high)
                    }
                };
                if !(l >= 0.0 && h.is_finite()) {
                    return Err(Error::config(
                        field,
                        format!("coefficients must be finite and >= 0, got {l}"),
                    ));
                }
                low.set(c.edge, c.slot, l);
                high.set(c.edge, c.slot, h);
            }
        }
        let support = BoxSupport::new(low, high)?;

        // Prior parameters arrive in declaration order; the prior stores
        // random coordinates row-major.
        let declared = self.declared_random(&network)?;
        let k = declared.len();
        let row_major = support.random_coordinates();
        let perm: Vec<usize> = row_major
            .iter()
            .map(|c| {
                declared
                    .iter()
                    .position(|d| d == c)
                    .expect("same coordinate set")
            })
            .collect();
        let reorder = |v: &[f64]| -> Vec<f64> { perm.iter().map(|&i| v[i]).collect() };
        let check_len = |field: &str, len: usize| -> Result<()> {
            if len != k {
                return Err(Error::config(
                    field,
                    format!("expected {k} values (one per random coefficient), got {len}"),
                ));
            }
            Ok(())
        };

        let prior = match (&self.prior, k) {
            (None, 0) => Prior::point(support.low.clone()),
            (None, _) | (Some(PriorSpec::Uniform), _) => Prior::uniform(support.clone())
                .map_err(|e| Error::config("prior", e.to_string()))?,
            (Some(PriorSpec::Discrete { atoms }), _) => {
                let mut converted = Vec::with_capacity(atoms.len());
                for (i, a) in atoms.iter().enumerate() {
                    check_len(&format!("prior.atoms[{i}].values"), a.values.len())?;
                    converted.push(Atom {
                        values: reorder(&a.values),
                        probability: a.probability,
                    });
                }
                Prior::discrete(support.clone(), converted)
                    .map_err(|e| Error::config("prior.atoms", e.to_string()))?
            }
            (Some(PriorSpec::TruncatedGaussian { mean, covariance }), _) => {
                check_len("prior.mean", mean.len())?;
                check_len("prior.covariance", covariance.len())?;
                for (i, row) in covariance.iter().enumerate() {
                    check_len(&format!("prior.covariance[{i}]"), row.len())?;
                }
                let cov = perm
                    .iter()
                    .map(|&i| perm.iter().map(|&j| covariance[i][j]).collect())
                    .collect();
                Prior::truncated_gaussian(support.clone(), reorder(mean), cov)
                    .map_err(|e| Error::config("prior", e.to_string()))?
            }
        };

        let set = [
            self.policy.granularity.is_some(),
            self.policy.sweep.is_some(),
            self.policy.boxes.is_some(),
        ];
        if set.iter().filter(|s| **s).count() > 1 {
            return Err(Error::config(
                "policy",
                "set only one of granularity, sweep, boxes",
            ));
        }
        let policy = if let Some(boxes) = &self.policy.boxes {
            let mut cells = Vec::with_capacity(boxes.len());
            for (i, b) in boxes.iter().enumerate() {
                check_len(&format!("policy.boxes[{i}].low"), b.low.len())?;
                check_len(&format!("policy.boxes[{i}].high"), b.high.len())?;
                cells.push(Cell {
                    label: b.label.clone().unwrap_or_else(|| format!("box{}", i + 1)),
                    low: reorder(&b.low),
                    high: reorder(&b.high),
                });
            }
            let p = SignallingPolicy::from_cells(&prior.random_bounds(), cells)
                .map_err(|e| Error::config("policy.boxes", e.to_string()))?;
            PolicyChoice::Boxes(p)
        } else {
            let range = match (self.policy.granularity, self.policy.sweep) {
                (Some(b), _) => SweepRange { min: b, max: b },
                (None, Some(r)) => r,
                (None, None) => DEFAULT_SWEEP,
            };
            if range.min < 1 || range.min > range.max {
                return Err(Error::config(
                    "policy",
                    format!("need 1 <= min <= max, got {}..{}", range.min, range.max),
                ));
            }
            PolicyChoice::Grids((range.min..=range.max).collect())
        };

        Ok(Experiment {
            network,
            prior,
            policy,
            tolls: self.tolls,
            monte_carlo: self.monte_carlo.clone(),
            solver: self.solver.clone(),
            output: self.output.clone(),
        })
    }
}

fn parse_slot(network: &Network, edge_key: &str, degree_key: &str) -> Result<Coordinate> {
    let field = format!("coefficients.{edge_key}.{degree_key}");
    let edge: usize = edge_key
        .strip_prefix("edge")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::config(&field, "edge keys look like `edge1`, `edge2`, …"))?;
    if edge < 1 || edge > network.edge_count() {
        return Err(Error::config(
            &field,
            format!("edge {edge} out of range 1..={}", network.edge_count()),
        ));
    }
    let degree: u32 = degree_key
        .strip_prefix('d')
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::config(&field, "degree keys look like `d0`, `d1`, …"))?;
    let slot = network.degrees().position(degree).ok_or_else(|| {
        Error::config(&field, format!("degree {degree} is not in network.degrees"))
    })?;
    Ok(Coordinate {
        edge: edge - 1,
        slot,
    })
}

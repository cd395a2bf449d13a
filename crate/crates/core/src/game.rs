//! Parallel congestion games with polynomial latencies.
//!
//! A game is a [`Network`] (edge count, degree set, demand) together with a
//! dense [`Coefficients`] grid holding `α[e][d]` for every edge and every
//! degree in the set. Edge latency is `ℓ_e(x) = Σ_d α[e][d]·x^d` with `0^0 = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted set of distinct polynomial degrees shared by every edge.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct DegreeSet(Vec<u32>);

impl DegreeSet {
    pub fn new(mut degrees: Vec<u32>) -> Result<Self> {
        if degrees.is_empty() {
            return Err(Error::arg("degree set must not be empty"));
        }
        degrees.sort_unstable();
        if degrees.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::arg("degree set contains duplicates"));
        }
        Ok(DegreeSet(degrees))
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Slot of `degree` in the coefficient grid, if present.
    pub fn position(&self, degree: u32) -> Option<usize> {
        self.0.binary_search(&degree).ok()
    }

    pub fn contains(&self, degree: u32) -> bool {
        self.position(degree).is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().copied()
    }
}

impl TryFrom<Vec<u32>> for DegreeSet {
    type Error = Error;

    fn try_from(v: Vec<u32>) -> Result<Self> {
        DegreeSet::new(v)
    }
}

impl From<DegreeSet> for Vec<u32> {
    fn from(d: DegreeSet) -> Self {
        d.0
    }
}

/// Parallel network: `edge_count` links between one origin and one
/// destination carrying total demand `demand`.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    edge_count: usize,
    degrees: DegreeSet,
    demand: f64,
}

impl Network {
    pub fn new(edge_count: usize, degrees: DegreeSet, demand: f64) -> Result<Self> {
        if edge_count < 2 {
            return Err(Error::arg(format!(
                "a parallel network needs at least 2 edges, got {edge_count}"
            )));
        }
        if !(demand > 0.0 && demand.is_finite()) {
            return Err(Error::arg(format!("demand must be positive, got {demand}")));
        }
        Ok(Network {
            edge_count,
            degrees,
            demand,
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn degrees(&self) -> &DegreeSet {
        &self.degrees
    }

    pub fn demand(&self) -> f64 {
        self.demand
    }

    /// Number of coefficient slots, `|E|·|D|`.
    pub fn coefficient_len(&self) -> usize {
        self.edge_count * self.degrees.len()
    }

    pub fn with_demand(&self, demand: f64) -> Result<Self> {
        Network::new(self.edge_count, self.degrees.clone(), demand)
    }

    pub(crate) fn check_edge(&self, edge: usize) -> Result<()> {
        if edge >= self.edge_count {
            return Err(Error::arg(format!(
                "edge index {edge} out of range (network has {} edges)",
                self.edge_count
            )));
        }
        Ok(())
    }

    pub(crate) fn check_coefficients(&self, alpha: &Coefficients) -> Result<()> {
        if alpha.edge_count() != self.edge_count || alpha.degree_count() != self.degrees.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} coefficients", self.edge_count, self.degrees.len()),
                actual: format!("{}x{}", alpha.edge_count(), alpha.degree_count()),
            });
        }
        Ok(())
    }

    pub(crate) fn check_flow(&self, flow: &Flow) -> Result<()> {
        if flow.per_edge.len() != self.edge_count {
            return Err(Error::ShapeMismatch {
                expected: format!("flow over {} edges", self.edge_count),
                actual: format!("{} entries", flow.per_edge.len()),
            });
        }
        Ok(())
    }
}

/// Dense `|E| × |D|` grid of nonnegative latency coefficients, row-major
/// by edge. Absent terms are explicit zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct Coefficients {
    edge_count: usize,
    degree_count: usize,
    values: Vec<f64>,
}

impl Coefficients {
    pub fn new(edge_count: usize, degree_count: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != edge_count * degree_count {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values", edge_count * degree_count),
                actual: format!("{}", values.len()),
            });
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(Error::arg(format!(
                "coefficient (edge {}, slot {}) must be finite and nonnegative, got {v}",
                i / degree_count.max(1),
                i % degree_count.max(1)
            )));
        }
        Ok(Coefficients {
            edge_count,
            degree_count,
            values,
        })
    }

    /// Builds from one row per edge; rows are indexed by degree slot.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let degree_count = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != degree_count) {
            return Err(Error::arg("coefficient rows have differing lengths"));
        }
        let values = rows
            .iter()
            .flat_map(|r| r.as_ref().iter().copied())
            .collect();
        Coefficients::new(rows.len(), degree_count, values)
    }

    pub fn zeros(network: &Network) -> Self {
        Coefficients {
            edge_count: network.edge_count(),
            degree_count: network.degrees().len(),
            values: vec![0.0; network.coefficient_len()],
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn degree_count(&self) -> usize {
        self.degree_count
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, edge: usize, slot: usize) -> f64 {
        self.values[edge * self.degree_count + slot]
    }

    /// Sets one entry. Panics on a negative or non-finite value.
    pub fn set(&mut self, edge: usize, slot: usize, value: f64) {
        assert!(
            value >= 0.0 && value.is_finite(),
            "coefficient must be >= 0"
        );
        self.values[edge * self.degree_count + slot] = value;
    }

    pub fn row(&self, edge: usize) -> &[f64] {
        let start = edge * self.degree_count;
        &self.values[start..start + self.degree_count]
    }

    /// Euclidean distance over all `|E|·|D|` slots.
    pub fn distance(&self, other: &Coefficients) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Whether edge `edge` has no positive term of degree ≥ 1, i.e. its
    /// latency is constant in the flow.
    pub fn is_constant_edge(&self, degrees: &DegreeSet, edge: usize) -> bool {
        self.row(edge)
            .iter()
            .zip(degrees.iter())
            .all(|(a, d)| d == 0 || *a == 0.0)
    }
}

/// Traffic assignment over the edges of a network.
#[derive(Clone, Debug, PartialEq)]
pub struct Flow {
    pub per_edge: Vec<f64>,
    pub total: f64,
}

impl Flow {
    pub fn new(per_edge: Vec<f64>) -> Self {
        let total = per_edge.iter().sum();
        Flow { per_edge, total }
    }

    pub fn zeros(edge_count: usize) -> Self {
        Flow {
            per_edge: vec![0.0; edge_count],
            total: 0.0,
        }
    }

    pub fn scaled(&self, factor: f64) -> Flow {
        Flow {
            per_edge: self.per_edge.iter().map(|f| f * factor).collect(),
            total: self.total * factor,
        }
    }
}

fn polynomial(degrees: &DegreeSet, row: &[f64], mass: f64, weight: impl Fn(u32) -> f64) -> f64 {
    row.iter()
        .zip(degrees.iter())
        .map(|(a, d)| weight(d) * a * mass.powi(d as i32))
        .sum()
}

/// `ℓ_e(x)` without bounds checks; callers guarantee shapes.
pub(crate) fn latency_unchecked(
    network: &Network,
    alpha: &Coefficients,
    edge: usize,
    mass: f64,
) -> f64 {
    polynomial(network.degrees(), alpha.row(edge), mass, |_| 1.0)
}

/// `ν_e(x) = d/dx [x·ℓ_e(x)]` without bounds checks.
pub(crate) fn marginal_unchecked(
    network: &Network,
    alpha: &Coefficients,
    edge: usize,
    mass: f64,
) -> f64 {
    polynomial(network.degrees(), alpha.row(edge), mass, |d| {
        f64::from(d + 1)
    })
}

pub fn edge_latency(
    network: &Network,
    alpha: &Coefficients,
    edge: usize,
    mass: f64,
) -> Result<f64> {
    network.check_coefficients(alpha)?;
    network.check_edge(edge)?;
    if !(mass >= 0.0) {
        return Err(Error::arg(format!("edge mass must be >= 0, got {mass}")));
    }
    Ok(latency_unchecked(network, alpha, edge, mass))
}

/// Marginal social cost of one more unit of traffic on `edge`.
pub fn marginal_cost(
    network: &Network,
    alpha: &Coefficients,
    edge: usize,
    mass: f64,
) -> Result<f64> {
    network.check_coefficients(alpha)?;
    network.check_edge(edge)?;
    if !(mass >= 0.0) {
        return Err(Error::arg(format!("edge mass must be >= 0, got {mass}")));
    }
    Ok(marginal_unchecked(network, alpha, edge, mass))
}

/// System cost `Σ_e f_e·ℓ_e(f_e)`.
pub fn total_latency(network: &Network, alpha: &Coefficients, flow: &Flow) -> Result<f64> {
    network.check_coefficients(alpha)?;
    network.check_flow(flow)?;
    Ok(total_latency_unchecked(network, alpha, &flow.per_edge))
}

pub(crate) fn total_latency_unchecked(
    network: &Network,
    alpha: &Coefficients,
    per_edge: &[f64],
) -> f64 {
    per_edge
        .iter()
        .enumerate()
        .map(|(e, &f)| f * latency_unchecked(network, alpha, e, f))
        .sum()
}

/// Rescales a game to unit demand.
///
/// Returns the unit-demand network and coefficients `α[e][d]·r^(d+1)`. A flow
/// `f` on the original game maps to `f / r` on the returned one with the same
/// total latency, and Nash/optimal flows correspond under that map.
pub fn normalize_demand(
    network: &Network,
    alpha: &Coefficients,
) -> Result<(Network, Coefficients)> {
    network.check_coefficients(alpha)?;
    let r = network.demand();
    let unit = network.with_demand(1.0)?;
    if r == 1.0 {
        return Ok((unit, alpha.clone()));
    }
    let degrees = network.degrees().as_slice();
    let values = alpha
        .values()
        .iter()
        .enumerate()
        .map(|(i, a)| a * r.powi(degrees[i % degrees.len()] as i32 + 1))
        .collect();
    let scaled = Coefficients::new(alpha.edge_count(), alpha.degree_count(), values)?;
    Ok((unit, scaled))
}

/// Which part of the positivity assumption an edge fails.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssumptionCondition {
    /// Degree 0 is not in the degree set.
    MissingConstantDegree,
    /// Degree 1 is not in the degree set.
    MissingLinearDegree,
    /// Lowest constant coefficient is zero.
    ZeroConstantTerm,
    /// Lowest linear coefficient is zero.
    ZeroLinearTerm,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AssumptionViolation {
    /// `None` for conditions on the degree set itself.
    pub edge: Option<usize>,
    pub condition: AssumptionCondition,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AssumptionReport {
    pub holds: bool,
    pub violations: Vec<AssumptionViolation>,
}

/// Checks that degrees 0 and 1 are present and that every edge's lowest
/// constant and linear coefficients are strictly positive.
pub fn check_assumption(network: &Network, support_low: &Coefficients) -> AssumptionReport {
    let mut violations = Vec::new();
    let degrees = network.degrees();
    let slot0 = degrees.position(0);
    let slot1 = degrees.position(1);
    if slot0.is_none() {
        violations.push(AssumptionViolation {
            edge: None,
            condition: AssumptionCondition::MissingConstantDegree,
        });
    }
    if slot1.is_none() {
        violations.push(AssumptionViolation {
            edge: None,
            condition: AssumptionCondition::MissingLinearDegree,
        });
    }
    if network.check_coefficients(support_low).is_ok() {
        for e in 0..network.edge_count() {
            if let Some(s) = slot0 {
                if support_low.get(e, s) <= 0.0 {
                    violations.push(AssumptionViolation {
                        edge: Some(e),
                        condition: AssumptionCondition::ZeroConstantTerm,
                    });
                }
            }
            if let Some(s) = slot1 {
                if support_low.get(e, s) <= 0.0 {
                    violations.push(AssumptionViolation {
                        edge: Some(e),
                        condition: AssumptionCondition::ZeroLinearTerm,
                    });
                }
            }
        }
    }
    AssumptionReport {
        holds: violations.is_empty(),
        violations,
    }
}

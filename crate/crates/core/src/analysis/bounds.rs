use serde::Serialize;

use crate::belief::BoxSupport;
use crate::error::{Error, Result};
use crate::game::{
    check_assumption, total_latency_unchecked, AssumptionReport, Coefficients, Network,
};
use crate::solver::{nash_flow, optimal_flow, SolverConfig};

/// Support-dependent constants of the benefit bounds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundConstants {
    /// Smallest lower-corner constant coefficient over edges.
    pub rho0_minus: f64,
    /// Smallest lower-corner linear coefficient over edges.
    pub rho1_minus: f64,
    /// Largest `Σ_d (d+1)·α⊤[e][d]` over edges.
    pub rho_plus: f64,
    /// Untolled Lipschitz constant.
    pub theta: f64,
    /// Tolled Lipschitz constant.
    pub xi: f64,
    pub assumption: AssumptionReport,
}

impl BoundConstants {
    /// `Θ·distance`, or `Ξ·distance` when `tolled`. A zero distance gives 0
    /// even when the constant is infinite.
    pub fn bound_value(&self, tolled: bool, distance: f64) -> BoundValue {
        let c = if tolled { self.xi } else { self.theta };
        BoundValue {
            value: if distance == 0.0 { 0.0 } else { c * distance },
            certified: self.assumption.holds,
        }
    }
}

/// A benefit bound. `certified` is false when the positivity assumption
/// behind it fails; the value is still reported.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundValue {
    pub value: f64,
    pub certified: bool,
}

pub fn bound_constants(network: &Network, support: &BoxSupport) -> BoundConstants {
    let degrees = network.degrees();
    let edges = 0..network.edge_count();
    let min_slot = |d: u32| {
        degrees.position(d).map_or(0.0, |s| {
            edges
                .clone()
                .map(|e| support.low.get(e, s))
                .fold(f64::INFINITY, f64::min)
        })
    };
    let rho0_minus = min_slot(0);
    let rho1_minus = min_slot(1);
    let rho_plus = edges
        .clone()
        .map(|e| {
            support
                .high
                .row(e)
                .iter()
                .zip(degrees.iter())
                .map(|(a, d)| f64::from(d + 1) * a)
                .sum::<f64>()
        })
        .fold(0.0, f64::max);

    let e = network.edge_count() as f64;
    let d = degrees.len() as f64;
    let power_sum: f64 = degrees
        .iter()
        .filter(|&k| k > 0)
        .map(|k| f64::from(k + 1).powi(k as i32))
        .sum();
    let spread = rho_plus - rho0_minus;
    let (theta, xi) = if rho1_minus > 0.0 {
        (
            d + spread / (2.0 * rho1_minus) * (e + d - 1.0),
            d + spread / (4.0 * rho1_minus) * (e + power_sum),
        )
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    BoundConstants {
        rho0_minus,
        rho1_minus,
        rho_plus,
        theta,
        xi,
        assumption: check_assumption(network, &support.low),
    }
}

/// Equilibrium total latency as a function of the coefficients: Nash flow
/// latency, or optimal latency when `tolled`.
pub fn equilibrium_latency(
    network: &Network,
    alpha: &Coefficients,
    tolled: bool,
    solver: &SolverConfig,
) -> Result<f64> {
    let eq = if tolled {
        optimal_flow(network, alpha, solver)?
    } else {
        nash_flow(network, alpha, solver)?
    };
    Ok(total_latency_unchecked(network, alpha, &eq.flow.per_edge))
}

/// Difference quotient `(L(a) − L(b)) / ‖a − b‖₂` of the equilibrium
/// latency between two coefficient vectors.
pub fn lipschitz_probe(
    network: &Network,
    a: &Coefficients,
    b: &Coefficients,
    tolled: bool,
    solver: &SolverConfig,
) -> Result<f64> {
    network.check_coefficients(a)?;
    network.check_coefficients(b)?;
    let distance = a.distance(b);
    if distance == 0.0 {
        return Err(Error::arg("probe points must differ"));
    }
    let la = equilibrium_latency(network, a, tolled, solver)?;
    let lb = equilibrium_latency(network, b, tolled, solver)?;
    Ok((la - lb) / distance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::DegreeSet;

    fn net(edges: usize, degrees: &[u32]) -> Network {
        Network::new(edges, DegreeSet::new(degrees.to_vec()).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn unit_corner_constants() {
        let n = net(2, &[0, 1]);
        let ones = Coefficients::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let c = bound_constants(&n, &BoxSupport::point(ones.clone()));
        assert_eq!(c.rho0_minus, 1.0);
        assert_eq!(c.rho1_minus, 1.0);
        assert_eq!(c.rho_plus, 3.0);
        assert_eq!(c.theta, 5.0);
        assert_eq!(c.xi, 4.0);
        assert!(c.assumption.holds);
        assert_eq!(c.bound_value(false, ones.distance(&ones)).value, 0.0);
    }

    #[test]
    fn missing_linear_term_gives_infinite_constants() {
        let n = net(2, &[0, 2]);
        let low = Coefficients::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let high = Coefficients::from_rows(&[[60.0, 1.0], [1.0, 60.0]]).unwrap();
        let c = bound_constants(&n, &BoxSupport::new(low, high).unwrap());
        assert!(c.theta.is_infinite() && c.xi.is_infinite());
        assert!(!c.assumption.holds);
        let v = c.bound_value(true, 2.0);
        assert!(!v.certified);
        assert_eq!(c.bound_value(true, 0.0).value, 0.0);
    }

    #[test]
    fn probe_rejects_equal_points() {
        let n = net(2, &[0, 1]);
        let a = Coefficients::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert!(lipschitz_probe(&n, &a, &a, false, &SolverConfig::default()).is_err());
    }

    #[test]
    fn probe_on_used_constant_edge() {
        // Constant edge carries flow at equilibrium; raising its constant by
        // eps raises Nash latency by at most eps at unit demand.
        let cfg = SolverConfig::default();
        let n = net(2, &[0, 1]);
        let b = Coefficients::from_rows(&[[0.5, 0.0], [0.0, 1.0]]).unwrap();
        let a = Coefficients::from_rows(&[[0.5 + 1e-6, 0.0], [0.0, 1.0]]).unwrap();
        let ratio = lipschitz_probe(&n, &a, &b, false, &cfg).unwrap();
        assert!(ratio <= 1.0 + 1e-6, "{ratio}");
        assert!(ratio > 0.0);
    }
}

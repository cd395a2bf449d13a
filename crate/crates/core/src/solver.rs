//! Nash and socially optimal flows on parallel networks.
//!
//! Both equilibria equalize a per-edge level function across used edges:
//! latency for Nash flows, marginal cost for optimal flows. Each level
//! function is a nonnegative polynomial, so it is either constant or strictly
//! increasing on `[0, ∞)`. The common level is found by bisection on the
//! level value, inverting each increasing edge by an inner bisection on
//! `[0, r]`. Constant edges act as a ceiling: once the increasing edges
//! cannot absorb the demand below the cheapest constant level, the remainder
//! is water-filled onto tied constant edges, lowest index first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{latency_unchecked, marginal_unchecked, Coefficients, Flow, Network};

const INNER_ITERATIONS: usize = 100;
const MAX_BRACKET_GROWTHS: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Allowed `|Σ f_e − r|` at termination.
    pub residual_tolerance: f64,
    /// Cap on outer (level) bisection steps.
    pub max_iterations: usize,
    /// Geometric factor for widening the upper level bracket.
    pub level_bracket_growth: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            residual_tolerance: 1e-10,
            max_iterations: 200,
            level_bracket_growth: 2.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tolerance > 0.0) {
            return Err(Error::arg("residual_tolerance must be > 0"));
        }
        if self.max_iterations < 1 {
            return Err(Error::arg("max_iterations must be >= 1"));
        }
        if !(self.level_bracket_growth > 1.0) {
            return Err(Error::arg("level_bracket_growth must be > 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumResult {
    pub flow: Flow,
    /// Equalized latency (Nash) or marginal cost (optimal) on used edges.
    pub common_level: f64,
    pub used_edges: Vec<usize>,
    pub iterations: usize,
    /// Set when several tied constant edges could share the remainder, so
    /// the returned split is one of many equilibria.
    pub degenerate: bool,
}

/// Wardrop equilibrium: every used edge has the same latency and no unused
/// edge is cheaper.
pub fn nash_flow(
    network: &Network,
    alpha: &Coefficients,
    config: &SolverConfig,
) -> Result<EquilibriumResult> {
    network.check_coefficients(alpha)?;
    config.validate()?;
    equalize(
        network,
        alpha,
        |e, x| latency_unchecked(network, alpha, e, x),
        config,
    )
}

/// Flow minimizing total latency: every used edge has the same marginal cost.
pub fn optimal_flow(
    network: &Network,
    alpha: &Coefficients,
    config: &SolverConfig,
) -> Result<EquilibriumResult> {
    network.check_coefficients(alpha)?;
    config.validate()?;
    equalize(
        network,
        alpha,
        |e, x| marginal_unchecked(network, alpha, e, x),
        config,
    )
}

/// Nash flow when every user of edge `e` also pays the constant `tolls[e]`.
pub fn tolled_nash_flow(
    network: &Network,
    alpha: &Coefficients,
    tolls: &[f64],
    config: &SolverConfig,
) -> Result<EquilibriumResult> {
    network.check_coefficients(alpha)?;
    config.validate()?;
    if tolls.len() != network.edge_count() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} tolls", network.edge_count()),
            actual: format!("{}", tolls.len()),
        });
    }
    if tolls.iter().any(|t| !t.is_finite()) {
        return Err(Error::arg("tolls must be finite"));
    }
    equalize(
        network,
        alpha,
        |e, x| latency_unchecked(network, alpha, e, x) + tolls[e],
        config,
    )
}

/// Smallest `x ∈ [0, r]` with `level(x) ≥ target`, for a strictly
/// increasing level function.
fn invert<F: Fn(f64) -> f64>(level: F, at_zero: f64, at_cap: f64, cap: f64, target: f64) -> f64 {
    if at_zero >= target {
        return 0.0;
    }
    if at_cap <= target {
        return cap;
    }
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..INNER_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if level(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn equalize<F>(
    network: &Network,
    alpha: &Coefficients,
    level: F,
    config: &SolverConfig,
) -> Result<EquilibriumResult>
where
    F: Fn(usize, f64) -> f64,
{
    let n = network.edge_count();
    let r = network.demand();
    let degrees = network.degrees();
    let constant: Vec<bool> = (0..n).map(|e| alpha.is_constant_edge(degrees, e)).collect();
    let at_zero: Vec<f64> = (0..n).map(|e| level(e, 0.0)).collect();
    let at_cap: Vec<f64> = (0..n).map(|e| level(e, r)).collect();
    let increasing: Vec<usize> = (0..n).filter(|&e| !constant[e]).collect();
    let ceiling = (0..n)
        .filter(|&e| constant[e])
        .map(|e| at_zero[e])
        .fold(None, |m: Option<f64>, c| Some(m.map_or(c, |m| m.min(c))));

    let flows_at = |lambda: f64| -> Vec<f64> {
        let mut f = vec![0.0; n];
        for &e in &increasing {
            f[e] = invert(|x| level(e, x), at_zero[e], at_cap[e], r, lambda);
        }
        f
    };
    let supply = |f: &[f64]| -> f64 { f.iter().sum() };

    // Increasing edges cannot absorb the demand below the cheapest constant
    // edge: that constant level is the equilibrium level.
    if let Some(c) = ceiling {
        let mut f = flows_at(c);
        let absorbed = supply(&f);
        if increasing.is_empty() || absorbed <= r {
            let tied: Vec<usize> = (0..n).filter(|&e| constant[e] && at_zero[e] == c).collect();
            let remainder = (r - absorbed).max(0.0);
            f[tied[0]] += remainder;
            return Ok(finish(f, c, 0, tied.len() > 1 && remainder > 0.0));
        }
    }

    let mut lo = increasing
        .iter()
        .map(|&e| at_zero[e])
        .fold(f64::INFINITY, f64::min);
    let mut hi = increasing
        .iter()
        .map(|&e| at_cap[e])
        .fold(f64::NEG_INFINITY, f64::max);
    if let Some(c) = ceiling {
        hi = hi.min(c);
    }
    let mut growths = 0;
    while supply(&flows_at(hi)) < r {
        if growths == MAX_BRACKET_GROWTHS || !hi.is_finite() {
            return Err(Error::NoConvergence {
                best: Flow::new(flows_at(hi)),
                residual: r - supply(&flows_at(hi)),
                iterations: 0,
            });
        }
        hi = lo + (hi - lo).max(1.0) * config.level_bracket_growth;
        growths += 1;
    }

    let mut iterations = 0;
    while iterations < config.max_iterations {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let s = supply(&flows_at(mid));
        // An exact match still shrinks from above: when one edge carries the
        // whole demand, every level up to the next edge's entry clears it.
        if s < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let (f_lo, f_hi) = (flows_at(lo), flows_at(hi));
    let (res_lo, res_hi) = ((supply(&f_lo) - r).abs(), (supply(&f_hi) - r).abs());
    let (lambda, f, residual) = if res_lo <= res_hi {
        (lo, f_lo, res_lo)
    } else {
        (hi, f_hi, res_hi)
    };
    if residual > config.residual_tolerance {
        return Err(Error::NoConvergence {
            best: Flow::new(f),
            residual,
            iterations,
        });
    }
    Ok(finish(f, lambda, iterations, false))
}

fn finish(
    per_edge: Vec<f64>,
    common_level: f64,
    iterations: usize,
    degenerate: bool,
) -> EquilibriumResult {
    let used_edges = per_edge
        .iter()
        .enumerate()
        .filter(|(_, f)| **f > 0.0)
        .map(|(e, _)| e)
        .collect();
    EquilibriumResult {
        flow: Flow::new(per_edge),
        common_level,
        used_edges,
        iterations,
        degenerate,
    }
}

/// Exhaustive minimum of total latency over the simplex discretized into
/// steps of `r / grid_points`. Test oracle for [`optimal_flow`].
pub fn brute_force_best_flow(
    network: &Network,
    alpha: &Coefficients,
    grid_points: usize,
) -> Result<Flow> {
    network.check_coefficients(alpha)?;
    let n = network.edge_count();
    if n > 4 {
        return Err(Error::arg(format!(
            "brute force supports at most 4 edges, got {n}"
        )));
    }
    if grid_points == 0 || grid_points > 2000 {
        return Err(Error::arg(format!(
            "grid_points must be in 1..=2000, got {grid_points}"
        )));
    }
    let r = network.demand();
    let step = r / grid_points as f64;
    // cost[e][k] = cost contributed by edge e carrying k grid steps
    let cost: Vec<Vec<f64>> = (0..n)
        .map(|e| {
            (0..=grid_points)
                .map(|k| {
                    let x = k as f64 * step;
                    x * latency_unchecked(network, alpha, e, x)
                })
                .collect()
        })
        .collect();

    let mut best = (f64::INFINITY, vec![0usize; n]);
    let mut current = vec![0usize; n];
    search(&cost, 0, grid_points, 0.0, &mut current, &mut best);

    let per_edge = best.1.iter().map(|&k| k as f64 * step).collect();
    Ok(Flow { per_edge, total: r })
}

fn search(
    cost: &[Vec<f64>],
    edge: usize,
    remaining: usize,
    acc: f64,
    current: &mut [usize],
    best: &mut (f64, Vec<usize>),
) {
    if edge + 1 == cost.len() {
        let total = acc + cost[edge][remaining];
        if total < best.0 {
            current[edge] = remaining;
            best.0 = total;
            best.1.copy_from_slice(current);
        }
        return;
    }
    for k in 0..=remaining {
        current[edge] = k;
        search(
            cost,
            edge + 1,
            remaining - k,
            acc + cost[edge][k],
            current,
            best,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{total_latency, DegreeSet};

    fn net(edges: usize, degrees: &[u32], demand: f64) -> Network {
        Network::new(edges, DegreeSet::new(degrees.to_vec()).unwrap(), demand).unwrap()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn nash_examples() {
        let cfg = SolverConfig::default();
        let n = net(2, &[0, 1], 1.0);

        let pigou = Coefficients::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let res = nash_flow(&n, &pigou, &cfg).unwrap();
        assert!(close(&res.flow.per_edge, &[0.0, 1.0], 1e-10), "{res:?}");
        assert!((res.common_level - 1.0).abs() < 1e-10);
        assert_eq!(res.used_edges, vec![1]);

        let sym = Coefficients::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let res = nash_flow(&n, &sym, &cfg).unwrap();
        assert!(close(&res.flow.per_edge, &[0.5, 0.5], 1e-10));
        assert!((res.common_level - 1.5).abs() < 1e-10);

        let two_point = Coefficients::from_rows(&[[0.5, 0.0], [0.0, 1.0]]).unwrap();
        let res = nash_flow(&n, &two_point, &cfg).unwrap();
        assert!(close(&res.flow.per_edge, &[0.5, 0.5], 1e-10), "{res:?}");
        assert!((res.common_level - 0.5).abs() < 1e-10);
    }

    #[test]
    fn optimal_examples() {
        let cfg = SolverConfig::default();
        let n = net(2, &[0, 1], 1.0);
        let pigou = Coefficients::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let res = optimal_flow(&n, &pigou, &cfg).unwrap();
        assert!(close(&res.flow.per_edge, &[0.5, 0.5], 1e-10));
        assert!((total_latency(&n, &pigou, &res.flow).unwrap() - 0.75).abs() < 1e-10);

        let sym = Coefficients::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let res = optimal_flow(&n, &sym, &cfg).unwrap();
        assert!(close(&res.flow.per_edge, &[0.5, 0.5], 1e-10));

        let n3 = net(3, &[0, 1], 1.0);
        let sym3 = Coefficients::from_rows(&[[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]).unwrap();
        let res = optimal_flow(&n3, &sym3, &cfg).unwrap();
        let third = 1.0 / 3.0;
        assert!(close(&res.flow.per_edge, &[third, third, third], 1e-10));
    }

    #[test]
    fn tied_constant_edges_fill_lowest_index() {
        let cfg = SolverConfig::default();
        let n = net(3, &[0, 1], 1.0);
        let a = Coefficients::from_rows(&[[2.0, 0.0], [2.0, 0.0], [1.5, 1.0]]).unwrap();
        let res = nash_flow(&n, &a, &cfg).unwrap();
        // edge 2 saturates at latency 2 with 0.5 mass; the rest goes to edge 0
        assert!(
            close(&res.flow.per_edge, &[0.5, 0.0, 0.5], 1e-10),
            "{res:?}"
        );
        assert!(res.degenerate);
        assert_eq!(res.common_level, 2.0);

        let all_const = Coefficients::from_rows(&[[3.0, 0.0], [1.0, 0.0], [1.0, 0.0]]).unwrap();
        let res = nash_flow(&n, &all_const, &cfg).unwrap();
        assert_eq!(res.flow.per_edge, vec![0.0, 1.0, 0.0]);
        assert!(res.degenerate);
    }

    #[test]
    fn demand_other_than_one() {
        let cfg = SolverConfig::default();
        let n = net(2, &[0, 1], 2.0);
        let pigou = Coefficients::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let res = nash_flow(&n, &pigou, &cfg).unwrap();
        assert!(close(&res.flow.per_edge, &[1.0, 1.0], 1e-10), "{res:?}");
        assert!((total_latency(&n, &pigou, &res.flow).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn single_used_edge_reports_its_latency() {
        let cfg = SolverConfig::default();
        let n = net(2, &[0, 1], 1.0);
        let a = Coefficients::from_rows(&[[1.5, 3.5], [0.25, 0.5]]).unwrap();
        let res = nash_flow(&n, &a, &cfg).unwrap();
        assert_eq!(res.flow.per_edge, vec![0.0, 1.0]);
        assert!((res.common_level - 0.75).abs() < 1e-12, "{res:?}");
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let cfg = SolverConfig {
            max_iterations: 1,
            ..SolverConfig::default()
        };
        let n = net(2, &[0, 1], 1.0);
        let a = Coefficients::from_rows(&[[0.3, 1.0], [0.1, 2.0]]).unwrap();
        match nash_flow(&n, &a, &cfg) {
            Err(Error::NoConvergence { best, .. }) => assert_eq!(best.per_edge.len(), 2),
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let n = net(2, &[0, 1], 1.0);
        let a = Coefficients::zeros(&n);
        let bad = SolverConfig {
            level_bracket_growth: 1.0,
            ..SolverConfig::default()
        };
        assert!(nash_flow(&n, &a, &bad).is_err());
    }

    #[test]
    fn brute_force_examples() {
        let n = net(2, &[0, 1], 1.0);
        let pigou = Coefficients::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let f = brute_force_best_flow(&n, &pigou, 1000).unwrap();
        assert!((total_latency(&n, &pigou, &f).unwrap() - 0.75).abs() < 1e-4);

        let sym = Coefficients::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let f = brute_force_best_flow(&n, &sym, 37).unwrap();
        assert!((f.per_edge[0] - f.per_edge[1]).abs() <= 1.0 / 37.0 + 1e-12);

        let corner = Coefficients::from_rows(&[[10.0, 1.0], [0.1, 1.0]]).unwrap();
        let f = brute_force_best_flow(&n, &corner, 500).unwrap();
        let opt = optimal_flow(&n, &corner, &SolverConfig::default()).unwrap();
        assert!(close(&f.per_edge, &opt.flow.per_edge, 2.0 / 500.0));

        let n5 = net(5, &[0, 1], 1.0);
        assert!(brute_force_best_flow(&n5, &Coefficients::zeros(&n5), 10).is_err());
        assert!(brute_force_best_flow(&n, &sym, 2001).is_err());
    }
}

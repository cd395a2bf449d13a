use serde::Serialize;

use crate::error::Result;
use crate::game::{Coefficients, Flow, Network};
use crate::solver::{optimal_flow, SolverConfig};

/// Constant per-edge charge levied while one signal is active.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TollVector {
    pub per_edge: Vec<f64>,
}

/// Signal-aware tolls for a posterior mean `expected_coeffs`:
/// `τ_e = Σ_d d·ᾱ[e][d]·x_e^d` with `x` the optimal flow under `ᾱ`.
///
/// With these tolls the Nash flow of the tolled game is `x`.
pub fn optimal_tolls(
    network: &Network,
    expected_coeffs: &Coefficients,
    solver: &SolverConfig,
) -> Result<TollVector> {
    let x = optimal_flow(network, expected_coeffs, solver)?.flow;
    Ok(tolls_at(network, expected_coeffs, &x))
}

/// Marginal-externality tolls evaluated at a given flow.
pub fn tolls_at(network: &Network, alpha: &Coefficients, flow: &Flow) -> TollVector {
    let degrees = network.degrees();
    let per_edge = flow
        .per_edge
        .iter()
        .enumerate()
        .map(|(e, &x)| {
            alpha
                .row(e)
                .iter()
                .zip(degrees.iter())
                .map(|(a, d)| f64::from(d) * a * x.powi(d as i32))
                .sum()
        })
        .collect();
    TollVector { per_edge }
}

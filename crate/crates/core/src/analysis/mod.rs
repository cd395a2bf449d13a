//! Expected system cost under a public signalling policy, with or without
//! signal-aware tolls, and the benefit of signalling over revealing nothing.
//!
//! A Bayes-Nash flow under a partition policy is, signal by signal, the
//! Nash flow of the game whose coefficients are the posterior means; and the
//! expected latency of a fixed flow equals its latency at the mean
//! coefficients. The expected system cost is therefore
//! `Σ_i p_i·L(f_i; ᾱ_i)` with `f_i` the Nash flow at `ᾱ_i`. Under the
//! optimal signal-aware tolls the tolled equilibrium is the optimal flow at
//! `ᾱ_i`, so the tolled cost uses `optimal_flow` directly.

mod bounds;
mod tolls;

pub use bounds::{
    bound_constants, equilibrium_latency, lipschitz_probe, BoundConstants, BoundValue,
};
pub use tolls::{optimal_tolls, tolls_at, TollVector};

use rayon::prelude::*;

use crate::belief::{Beliefs, MonteCarloConfig, PosteriorSummary, Prior, SignallingPolicy};
use crate::error::{Error, Result};
use crate::game::{total_latency_unchecked, Coefficients, Flow, Network};
use crate::solver::{nash_flow, optimal_flow, SolverConfig};

/// Equilibrium under one signal.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalOutcome {
    pub label: String,
    pub probability: f64,
    pub expected_coeffs: Coefficients,
    pub flow: Flow,
    /// Total latency of `flow` at `expected_coeffs` (tolls excluded).
    pub latency: f64,
    /// Tolls in force for this signal; `None` when untolled.
    pub tolls: Option<TollVector>,
    pub sample_count: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyEvaluation {
    pub expected_latency: f64,
    pub signals: Vec<SignalOutcome>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenefitReport {
    /// Expected total latency when nothing is revealed.
    pub baseline_latency: f64,
    pub signalled_latency: f64,
    /// `baseline_latency − signalled_latency`.
    pub benefit: f64,
    pub tolled: bool,
    pub bound: BoundValue,
    /// Delta-method standard error of `benefit`; 0 for closed-form priors.
    pub standard_error: f64,
    pub per_signal: Vec<SignalOutcome>,
}

/// A network, a prior with its integration machinery, and solver settings.
#[derive(Clone, Debug)]
pub struct SignallingGame {
    network: Network,
    beliefs: Beliefs,
    solver: SolverConfig,
}

impl SignallingGame {
    pub fn new(
        network: Network,
        prior: Prior,
        solver: SolverConfig,
        mc: &MonteCarloConfig,
    ) -> Result<Self> {
        prior.check_network(&network)?;
        solver.validate()?;
        let beliefs = Beliefs::new(prior, mc)?;
        Ok(SignallingGame {
            network,
            beliefs,
            solver,
        })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn beliefs(&self) -> &Beliefs {
        &self.beliefs
    }

    pub fn solver(&self) -> &SolverConfig {
        &self.solver
    }

    /// Solves one signal.
    fn outcome(&self, summary: &PosteriorSummary, tolled: bool) -> Result<SignalOutcome> {
        let alpha = &summary.expected_coeffs;
        let (flow, tolls) = if tolled {
            let flow = optimal_flow(&self.network, alpha, &self.solver)?.flow;
            let tolls = tolls_at(&self.network, alpha, &flow);
            (flow, Some(tolls))
        } else {
            (nash_flow(&self.network, alpha, &self.solver)?.flow, None)
        };
        Ok(SignalOutcome {
            label: summary.label.clone(),
            probability: summary.cell_probability,
            expected_coeffs: alpha.clone(),
            latency: total_latency_unchecked(&self.network, alpha, &flow.per_edge),
            flow,
            tolls,
            sample_count: summary.sample_count,
        })
    }

    pub fn evaluate(&self, policy: &SignallingPolicy, tolled: bool) -> Result<PolicyEvaluation> {
        let summaries = self.beliefs.summaries(policy)?;
        let signals = summaries
            .par_iter()
            .map(|s| self.outcome(s, tolled).map_err(|e| e.in_cell(&s.label)))
            .collect::<Result<Vec<_>>>()?;
        let expected_latency = signals.iter().map(|s| s.probability * s.latency).sum();
        Ok(PolicyEvaluation {
            expected_latency,
            signals,
        })
    }

    /// Expected latency when nothing is revealed.
    pub fn baseline(&self, tolled: bool) -> Result<PolicyEvaluation> {
        self.evaluate(&self.beliefs.no_information(), tolled)
    }

    pub fn benefit(&self, policy: &SignallingPolicy, tolled: bool) -> Result<BenefitReport> {
        let baseline = self.baseline(tolled)?;
        self.benefit_against(&baseline, policy, tolled)
    }

    /// [`SignallingGame::benefit`] reusing a precomputed baseline.
    pub fn benefit_against(
        &self,
        baseline: &PolicyEvaluation,
        policy: &SignallingPolicy,
        tolled: bool,
    ) -> Result<BenefitReport> {
        let signalled = self.evaluate(policy, tolled)?;
        let mean = &baseline.signals[0].expected_coeffs;
        let constants = bound_constants(&self.network, self.beliefs.prior().support());
        let distance = mean.distance(&self.beliefs.prior().support().low);
        let standard_error = match self.beliefs.pool() {
            Some(_) => self.benefit_standard_error(baseline, &signalled, policy, tolled)?,
            None => 0.0,
        };
        Ok(BenefitReport {
            baseline_latency: baseline.expected_latency,
            signalled_latency: signalled.expected_latency,
            benefit: baseline.expected_latency - signalled.expected_latency,
            tolled,
            bound: constants.bound_value(tolled, distance),
            standard_error,
            per_signal: signalled.signals,
        })
    }

    pub fn bound_constants(&self) -> BoundConstants {
        bound_constants(&self.network, self.beliefs.prior().support())
    }

    /// `‖E[α] − α⊥‖₂` over every coefficient slot.
    pub fn mean_distance(&self) -> Result<f64> {
        Ok(self
            .beliefs
            .mean()?
            .distance(&self.beliefs.prior().support().low))
    }

    /// Gradient of the equilibrium latency in the random coordinates, by
    /// central differences (one-sided at the lower support edge).
    fn latency_gradient(&self, alpha: &Coefficients, tolled: bool) -> Result<Vec<f64>> {
        let prior = self.beliefs.prior();
        prior
            .random_coordinates()
            .iter()
            .zip(prior.random_bounds())
            .map(|(c, (low, _))| {
                let x = alpha.get(c.edge, c.slot);
                let h = 1e-6 * x.abs().max(1.0);
                let lo = (x - h).max(low.min(x)).max(0.0);
                let hi = x + h;
                let at = |v: f64| {
                    let mut a = alpha.clone();
                    a.set(c.edge, c.slot, v);
                    equilibrium_latency(&self.network, &a, tolled, &self.solver)
                };
                Ok((at(hi)? - at(lo)?) / (hi - lo))
            })
            .collect()
    }

    /// Linearized (delta-method) standard error of the benefit estimated on
    /// the shared sample pool.
    ///
    /// The benefit is `g(m) − Σ_i (n_i/n)·g(m_i)` with `m` the pool mean and
    /// `m_i` the cell means. A sample `x` in cell `i` has influence
    /// `∇g(m)·(x − m) − [g(m_i) − S + ∇g(m_i)·(x − m_i)]`, where `S` is the
    /// signalled latency; the variance estimate is the mean squared
    /// influence divided by `n`.
    fn benefit_standard_error(
        &self,
        baseline: &PolicyEvaluation,
        signalled: &PolicyEvaluation,
        policy: &SignallingPolicy,
        tolled: bool,
    ) -> Result<f64> {
        let pool = self.beliefs.pool().expect("sampled prior");
        let prior = self.beliefs.prior();
        let coords = prior.random_coordinates();
        let project = |a: &Coefficients| -> Vec<f64> {
            coords.iter().map(|c| a.get(c.edge, c.slot)).collect()
        };

        let base = &baseline.signals[0];
        let base_mean = project(&base.expected_coeffs);
        let base_grad = self.latency_gradient(&base.expected_coeffs, tolled)?;

        let mut by_cell = vec![None; policy.len()];
        let summaries = self.beliefs.summaries(policy)?;
        let grads = signalled
            .signals
            .par_iter()
            .map(|s| self.latency_gradient(&s.expected_coeffs, tolled))
            .collect::<Result<Vec<_>>>()?;
        for ((summary, signal), grad) in summaries.iter().zip(&signalled.signals).zip(grads) {
            by_cell[summary.cell] = Some((project(&signal.expected_coeffs), signal.latency, grad));
        }

        let total = signalled.expected_latency;
        let mut sum_sq = 0.0;
        for x in pool.iter() {
            let cell = policy
                .locate(x)
                .ok_or_else(|| Error::Estimation("sample outside every cell".into()))?;
            let (mean, latency, grad) =
                by_cell[cell].as_ref().expect("occupied cell has a summary");
            let dot = |g: &[f64], m: &[f64]| -> f64 {
                g.iter()
                    .zip(x.iter().zip(m))
                    .map(|(g, (x, m))| g * (x - m))
                    .sum()
            };
            let influence = dot(&base_grad, &base_mean) - (latency - total + dot(grad, mean));
            sum_sq += influence * influence;
        }
        let n = pool.len() as f64;
        Ok((sum_sq / n).sqrt() / n.sqrt())
    }
}

/// Expected total latency of the Bayes-Nash (or tolled) flow under `policy`.
pub fn expected_latency_under_policy(
    network: &Network,
    prior: &Prior,
    policy: &SignallingPolicy,
    tolled: bool,
    solver: &SolverConfig,
    mc: &MonteCarloConfig,
) -> Result<PolicyEvaluation> {
    SignallingGame::new(network.clone(), prior.clone(), solver.clone(), mc)?
        .evaluate(policy, tolled)
}

/// Benefit of `policy` over revealing nothing.
pub fn benefit(
    network: &Network,
    prior: &Prior,
    policy: &SignallingPolicy,
    tolled: bool,
    solver: &SolverConfig,
    mc: &MonteCarloConfig,
) -> Result<BenefitReport> {
    SignallingGame::new(network.clone(), prior.clone(), solver.clone(), mc)?.benefit(policy, tolled)
}

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Experiment, PolicyChoice};
use crate::analysis::{optimal_tolls, BenefitReport, BoundConstants, SignallingGame, TollVector};
use crate::error::{Error, Result};
use crate::game::total_latency;
use crate::solver::{nash_flow, optimal_flow, EquilibriumResult};

/// Column names of the sweep CSV, in order.
pub const SWEEP_COLUMNS: [&str; 10] = [
    "b",
    "baseline_untolled",
    "signalled_untolled",
    "benefit_untolled",
    "baseline_tolled",
    "signalled_tolled",
    "benefit_tolled",
    "theta_bound_value",
    "xi_bound_value",
    "mc_stderr",
];

/// Flows, latencies, tolls and bound constants of a deterministic game.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub nash: EquilibriumResult,
    pub nash_latency: f64,
    pub optimal: EquilibriumResult,
    pub optimal_latency: f64,
    pub tolls: TollVector,
    pub bounds: BoundConstants,
}

pub fn run_solve(exp: &Experiment) -> Result<SolveReport> {
    if exp.prior.dimension() != 0 {
        return Err(Error::config(
            "coefficients",
            "solve needs deterministic coefficients; remove the { low, high } entries",
        ));
    }
    let alpha = &exp.prior.support().low;
    let nash = nash_flow(&exp.network, alpha, &exp.solver)?;
    let optimal = optimal_flow(&exp.network, alpha, &exp.solver)?;
    Ok(SolveReport {
        nash_latency: total_latency(&exp.network, alpha, &nash.flow)?,
        optimal_latency: total_latency(&exp.network, alpha, &optimal.flow)?,
        tolls: optimal_tolls(&exp.network, alpha, &exp.solver)?,
        bounds: crate::analysis::bound_constants(&exp.network, exp.prior.support()),
        nash,
        optimal,
    })
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "nash flow       {}", fmt_vec(&self.nash.flow.per_edge))?;
        writeln!(f, "nash latency    {:.9}", self.nash_latency)?;
        writeln!(f, "nash level      {:.9}", self.nash.common_level)?;
        if self.nash.degenerate {
            writeln!(
                f,
                "  (tied constant edges; split is one of several equilibria)"
            )?;
        }
        writeln!(
            f,
            "optimal flow    {}",
            fmt_vec(&self.optimal.flow.per_edge)
        )?;
        writeln!(f, "optimal latency {:.9}", self.optimal_latency)?;
        writeln!(f, "tolls           {}", fmt_vec(&self.tolls.per_edge))?;
        write!(f, "{}", ConstantsDisplay(&self.bounds))
    }
}

struct ConstantsDisplay<'a>(&'a BoundConstants);

impl fmt::Display for ConstantsDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.0;
        writeln!(f, "rho0_minus      {}", c.rho0_minus)?;
        writeln!(f, "rho1_minus      {}", c.rho1_minus)?;
        writeln!(f, "rho_plus        {}", c.rho_plus)?;
        writeln!(f, "theta           {}", c.theta)?;
        writeln!(f, "xi              {}", c.xi)?;
        if c.assumption.holds {
            writeln!(f, "assumption      holds")
        } else {
            writeln!(f, "assumption      fails (bounds not certified)")?;
            for v in &c.assumption.violations {
                match v.edge {
                    Some(e) => writeln!(f, "  edge{}: {:?}", e + 1, v.condition)?,
                    None => writeln!(f, "  degree set: {:?}", v.condition)?,
                }
            }
            Ok(())
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub constants: BoundConstants,
    /// `‖E[α] − α⊥‖₂`.
    pub mean_distance: f64,
    pub theta_bound_value: f64,
    pub xi_bound_value: f64,
    pub certified: bool,
}

pub fn run_bounds(exp: &Experiment) -> Result<BoundsReport> {
    let game = SignallingGame::new(
        exp.network.clone(),
        exp.prior.clone(),
        exp.solver.clone(),
        &exp.monte_carlo,
    )?;
    let constants = game.bound_constants();
    let mean_distance = game.mean_distance()?;
    let theta = constants.bound_value(false, mean_distance);
    let xi = constants.bound_value(true, mean_distance);
    Ok(BoundsReport {
        mean_distance,
        theta_bound_value: theta.value,
        xi_bound_value: xi.value,
        certified: constants.assumption.holds,
        constants,
    })
}

impl fmt::Display for BoundsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", ConstantsDisplay(&self.constants))?;
        writeln!(f, "mean distance   {}", self.mean_distance)?;
        let tag = if self.certified {
            ""
        } else {
            " (not certified)"
        };
        writeln!(f, "theta bound     {}{tag}", self.theta_bound_value)?;
        writeln!(f, "xi bound        {}{tag}", self.xi_bound_value)
    }
}

/// One granularity of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    /// Grid granularity; 0 for an explicit box policy.
    pub b: usize,
    pub baseline_untolled: f64,
    pub signalled_untolled: f64,
    pub benefit_untolled: f64,
    pub baseline_tolled: f64,
    pub signalled_tolled: f64,
    pub benefit_tolled: f64,
    pub theta_bound: f64,
    pub xi_bound: f64,
    pub stderr_untolled: f64,
    pub stderr_tolled: f64,
    pub certified: bool,
    /// Set when this row could not be computed; numeric fields are NaN.
    pub error: Option<String>,
}

impl SweepRow {
    /// Larger of the two benefit standard errors.
    pub fn mc_stderr(&self) -> f64 {
        match (self.stderr_untolled.is_nan(), self.stderr_tolled.is_nan()) {
            (true, _) => self.stderr_tolled,
            (_, true) => self.stderr_untolled,
            _ => self.stderr_untolled.max(self.stderr_tolled),
        }
    }

    fn failed(b: usize, error: String) -> Self {
        SweepRow {
            b,
            baseline_untolled: f64::NAN,
            signalled_untolled: f64::NAN,
            benefit_untolled: f64::NAN,
            baseline_tolled: f64::NAN,
            signalled_tolled: f64::NAN,
            benefit_tolled: f64::NAN,
            theta_bound: f64::NAN,
            xi_bound: f64::NAN,
            stderr_untolled: f64::NAN,
            stderr_tolled: f64::NAN,
            certified: false,
            error: Some(error),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub accepted_samples: Option<usize>,
}

/// Benefit with and without tolls for every policy of the experiment, all
/// evaluated against one set of beliefs (one sample pool).
pub fn run_sweep(exp: &Experiment) -> Result<SweepOutcome> {
    let game = SignallingGame::new(
        exp.network.clone(),
        exp.prior.clone(),
        exp.solver.clone(),
        &exp.monte_carlo,
    )?;
    let base_untolled = exp
        .tolls
        .untolled()
        .then(|| game.baseline(false))
        .transpose()?;
    let base_tolled = exp
        .tolls
        .tolled()
        .then(|| game.baseline(true))
        .transpose()?;

    let policies: Vec<(usize, crate::belief::SignallingPolicy)> = match &exp.policy {
        PolicyChoice::Grids(bs) => bs
            .iter()
            .map(|&b| game.beliefs().grid(b).map(|p| (b, p)))
            .collect::<Result<_>>()?,
        PolicyChoice::Boxes(p) => vec![(0, p.clone())],
    };

    let rows = policies
        .par_iter()
        .map(|(b, policy)| {
            let eval = |base: &Option<_>, tolled| -> Result<Option<BenefitReport>> {
                base.as_ref()
                    .map(|base| game.benefit_against(base, policy, tolled))
                    .transpose()
            };
            match (eval(&base_untolled, false), eval(&base_tolled, true)) {
                (Ok(u), Ok(t)) => row_from(*b, &game, u, t),
                (Err(e), _) | (_, Err(e)) => {
                    tracing::warn!(b, error = %e, "sweep row failed");
                    SweepRow::failed(*b, e.to_string())
                }
            }
        })
        .collect();
    Ok(SweepOutcome {
        rows,
        accepted_samples: game.beliefs().pool().map(|p| p.len()),
    })
}

fn row_from(
    b: usize,
    game: &SignallingGame,
    u: Option<BenefitReport>,
    t: Option<BenefitReport>,
) -> SweepRow {
    let get =
        |r: &Option<BenefitReport>, f: fn(&BenefitReport) -> f64| r.as_ref().map_or(f64::NAN, f);
    let constants = game.bound_constants();
    let bound = |r: &Option<BenefitReport>, tolled: bool| {
        r.as_ref().map_or_else(
            || {
                constants
                    .bound_value(tolled, game.mean_distance().unwrap_or(f64::NAN))
                    .value
            },
            |r| r.bound.value,
        )
    };
    SweepRow {
        b,
        baseline_untolled: get(&u, |r| r.baseline_latency),
        signalled_untolled: get(&u, |r| r.signalled_latency),
        benefit_untolled: get(&u, |r| r.benefit),
        baseline_tolled: get(&t, |r| r.baseline_latency),
        signalled_tolled: get(&t, |r| r.signalled_latency),
        benefit_tolled: get(&t, |r| r.benefit),
        theta_bound: bound(&u, false),
        xi_bound: bound(&t, true),
        stderr_untolled: get(&u, |r| r.standard_error),
        stderr_tolled: get(&t, |r| r.standard_error),
        certified: constants.assumption.holds,
        error: None,
    }
}

/// Writes the sweep as CSV preceded by one `#` provenance line.
pub fn write_sweep_csv<W: Write>(
    mut out: W,
    exp: &Experiment,
    outcome: &SweepOutcome,
) -> Result<()> {
    let accepted = outcome
        .accepted_samples
        .map_or(String::new(), |n| format!(" accepted={n}"));
    writeln!(
        out,
        "# bayes-congestion {} sweep seed={} samples={}{accepted} tolls={:?}",
        env!("CARGO_PKG_VERSION"),
        exp.monte_carlo.seed,
        exp.monte_carlo.samples,
        exp.tolls,
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_COLUMNS)?;
    for r in &outcome.rows {
        let values = [
            r.baseline_untolled,
            r.signalled_untolled,
            r.benefit_untolled,
            r.baseline_tolled,
            r.signalled_tolled,
            r.benefit_tolled,
            r.theta_bound,
            r.xi_bound,
            r.mc_stderr(),
        ];
        let mut record = vec![r.b.to_string()];
        record.extend(values.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::ExperimentConfig;

    fn pigou() -> Experiment {
        ExperimentConfig::from_toml(
            "[network]\nedges = 2\ndegrees = [0, 1]\n[coefficients]\nedge1.d0 = 1.0\nedge2.d1 = 1.0\n",
        )
        .unwrap()
        .build()
        .unwrap()
    }

    #[test]
    fn solve_pigou() {
        let r = run_solve(&pigou()).unwrap();
        assert!((r.nash_latency - 1.0).abs() < 1e-9);
        assert!((r.optimal_latency - 0.75).abs() < 1e-9);
        assert!(r.tolls.per_edge[0].abs() < 1e-12);
        assert!((r.tolls.per_edge[1] - 0.5).abs() < 1e-9);
        let text = r.to_string();
        assert!(text.contains("nash latency"));
    }

    #[test]
    fn solve_refuses_random_coefficients() {
        let exp = ExperimentConfig::from_toml(
            "[network]\nedges = 2\ndegrees = [0, 1]\n[coefficients]\nedge1.d0 = { low = 0.0, high = 1.0 }\nedge2.d1 = 1.0\n",
        )
        .unwrap()
        .build()
        .unwrap();
        assert!(matches!(run_solve(&exp), Err(Error::Config { .. })));
    }

    #[test]
    fn deterministic_sweep_is_all_zero() {
        let mut exp = pigou();
        exp.policy = PolicyChoice::Grids(vec![1, 2, 3]);
        let out = run_sweep(&exp).unwrap();
        assert_eq!(out.rows.len(), 3);
        for r in &out.rows {
            assert_eq!(r.benefit_untolled, 0.0);
            assert_eq!(r.benefit_tolled, 0.0);
            assert_eq!(r.theta_bound, 0.0);
        }
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &exp, &out).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# bayes-congestion"));
        assert_eq!(lines.next().unwrap(), SWEEP_COLUMNS.join(","));
        assert_eq!(lines.count(), 3);
    }
}

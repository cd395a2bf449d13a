//! Priors over coefficient vectors, partition signalling policies, and the
//! posterior quantities a signal induces: its probability and the
//! conditional mean of the coefficients.
//!
//! Uniform and discrete priors are summarized in closed form. Truncated
//! Gaussian priors go through a [`SamplePool`]: one seeded batch of draws,
//! rejection-filtered to the support box and shared by every policy
//! evaluated against the same [`Beliefs`].

mod policy;
mod prior;

pub use policy::{grid_policy, uniform_grid_policy, Cell, SignallingPolicy};
pub use prior::{Atom, BoxSupport, Coordinate, Prior, PriorKind};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Coefficients;

const MIN_SURVIVORS: usize = 100;
const MIN_ACCEPTANCE: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub seed: u64,
    /// Draws before rejection.
    pub samples: usize,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            seed: 42,
            samples: 1_000_000,
        }
    }
}

/// Posterior after one signal.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSummary {
    pub label: String,
    /// Index of the cell in the policy.
    pub cell: usize,
    pub cell_probability: f64,
    pub expected_coeffs: Coefficients,
    /// Samples that landed in the cell; 0 for closed-form priors.
    pub sample_count: usize,
    /// Standard error of each random coordinate's conditional mean.
    pub standard_error: Vec<f64>,
}

/// Accepted draws of a truncated Gaussian, stored row by row.
#[derive(Clone, Debug)]
pub struct SamplePool {
    dimension: usize,
    values: Vec<f64>,
    drawn: usize,
}

impl SamplePool {
    pub fn draw(prior: &Prior, mc: &MonteCarloConfig) -> Result<Self> {
        let (mean, covariance) = match prior.kind() {
            PriorKind::TruncatedGaussian { mean, covariance } => (mean, covariance),
            _ => {
                return Err(Error::arg(
                    "sample pools are only built for truncated Gaussian priors",
                ))
            }
        };
        let k = prior.dimension();
        let factor = prior::covariance_factor(covariance)?;
        let bounds = prior.random_bounds();
        let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
        let mut z = vec![0.0; k];
        let mut x = vec![0.0; k];
        let mut values = Vec::with_capacity(mc.samples * k);
        for _ in 0..mc.samples {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut rng);
            }
            for i in 0..k {
                x[i] = mean[i] + (0..k).map(|j| factor[(i, j)] * z[j]).sum::<f64>();
            }
            if x.iter().zip(&bounds).all(|(v, (l, h))| l <= v && v <= h) {
                values.extend_from_slice(&x);
            }
        }
        let pool = SamplePool {
            dimension: k,
            values,
            drawn: mc.samples,
        };
        let accepted = pool.len();
        if accepted < MIN_SURVIVORS {
            return Err(Error::Estimation(format!(
                "only {accepted} of {} draws fell inside the support (need {MIN_SURVIVORS})",
                mc.samples
            )));
        }
        if (accepted as f64) < MIN_ACCEPTANCE * mc.samples as f64 {
            return Err(Error::Estimation(format!(
                "acceptance rate {:.4} below {MIN_ACCEPTANCE}",
                accepted as f64 / mc.samples as f64
            )));
        }
        Ok(pool)
    }

    pub fn len(&self) -> usize {
        self.values.len().checked_div(self.dimension).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn drawn(&self) -> usize {
        self.drawn
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.len() as f64 / self.drawn as f64
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.values[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dimension.max(1))
    }

    /// Cell index of every sample under `policy`.
    pub fn assign(&self, policy: &SignallingPolicy) -> Vec<Option<usize>> {
        self.iter().map(|s| policy.locate(s)).collect()
    }
}

/// A prior together with whatever is needed to integrate against it.
#[derive(Clone, Debug)]
pub struct Beliefs {
    prior: Prior,
    pool: Option<SamplePool>,
}

impl Beliefs {
    pub fn new(prior: Prior, mc: &MonteCarloConfig) -> Result<Self> {
        let pool = match prior.kind() {
            PriorKind::TruncatedGaussian { .. } if prior.dimension() > 0 => {
                Some(SamplePool::draw(&prior, mc)?)
            }
            _ => None,
        };
        Ok(Beliefs { prior, pool })
    }

    pub fn prior(&self) -> &Prior {
        &self.prior
    }

    pub fn pool(&self) -> Option<&SamplePool> {
        self.pool.as_ref()
    }

    pub fn is_monte_carlo(&self) -> bool {
        self.pool.is_some()
    }

    /// Policy with a single cell covering the support.
    pub fn no_information(&self) -> SignallingPolicy {
        SignallingPolicy::no_information(&self.prior.random_bounds())
    }

    pub fn grid(&self, granularity: usize) -> Result<SignallingPolicy> {
        grid_policy(&self.prior.random_bounds(), granularity)
    }

    /// `E[α]`. For sampled priors this is the pool mean, which coincides
    /// with the summary of the no-information policy.
    pub fn mean(&self) -> Result<Coefficients> {
        let s = self.summaries(&self.no_information())?;
        Ok(s.into_iter()
            .next()
            .expect("no-information policy has one cell")
            .expected_coeffs)
    }

    /// Posterior summaries for every nonempty cell, in cell order.
    pub fn summaries(&self, policy: &SignallingPolicy) -> Result<Vec<PosteriorSummary>> {
        let k = self.prior.dimension();
        if let Some(cell) = policy.cells().iter().find(|c| c.low.len() != k) {
            return Err(Error::ShapeMismatch {
                expected: format!("policy over {k} random coordinates"),
                actual: format!("cell {} has {}", cell.label, cell.low.len()),
            });
        }
        let raw = match (self.prior.kind(), &self.pool) {
            (_, _) if k == 0 => vec![Some((1.0, Vec::new(), 0, Vec::new()))]
                .into_iter()
                .chain(std::iter::repeat_n(None, policy.len() - 1))
                .collect(),
            (PriorKind::UniformBox, _) => self.uniform_cells(policy),
            (PriorKind::Discrete(atoms), _) => discrete_cells(atoms, policy)?,
            (PriorKind::TruncatedGaussian { .. }, Some(pool)) => sampled_cells(pool, policy)?,
            _ => unreachable!("truncated Gaussian without a pool"),
        };

        let mut out = Vec::new();
        for (i, entry) in raw.into_iter().enumerate() {
            let label = &policy.cells()[i].label;
            match entry {
                Some((p, mean, count, se)) => out.push(PosteriorSummary {
                    label: label.clone(),
                    cell: i,
                    cell_probability: p,
                    expected_coeffs: self.prior.embed(&mean),
                    sample_count: count,
                    standard_error: se,
                }),
                None => tracing::warn!(cell = %label, "signal has zero prior mass; excluded"),
            }
        }
        Ok(out)
    }

    fn uniform_cells(&self, policy: &SignallingPolicy) -> Vec<Option<CellStats>> {
        let bounds = self.prior.random_bounds();
        let volume: f64 = bounds.iter().map(|(l, h)| h - l).product();
        policy
            .cells()
            .iter()
            .map(|c| {
                let p = c.overlap(&bounds) / volume;
                (p > 0.0).then(|| {
                    let mean = c
                        .low
                        .iter()
                        .zip(&c.high)
                        .zip(&bounds)
                        .map(|((l, h), (bl, bh))| 0.5 * (l.max(*bl) + h.min(*bh)))
                        .collect();
                    (p, mean, 0, vec![0.0; bounds.len()])
                })
            })
            .collect()
    }
}

/// (probability, conditional mean of random coordinates, samples, stderr)
type CellStats = (f64, Vec<f64>, usize, Vec<f64>);

fn discrete_cells(atoms: &[Atom], policy: &SignallingPolicy) -> Result<Vec<Option<CellStats>>> {
    let k = atoms.first().map_or(0, |a| a.values.len());
    let mut mass = vec![0.0; policy.len()];
    let mut sums = vec![vec![0.0; k]; policy.len()];
    for (n, atom) in atoms.iter().enumerate() {
        let i = policy
            .locate(&atom.values)
            .ok_or_else(|| Error::arg(format!("atom {n} is not covered by the policy")))?;
        mass[i] += atom.probability;
        for (s, v) in sums[i].iter_mut().zip(&atom.values) {
            *s += atom.probability * v;
        }
    }
    Ok(mass
        .into_iter()
        .zip(sums)
        .map(|(p, s)| (p > 0.0).then(|| (p, s.iter().map(|v| v / p).collect(), 0, vec![0.0; k])))
        .collect())
}

fn sampled_cells(pool: &SamplePool, policy: &SignallingPolicy) -> Result<Vec<Option<CellStats>>> {
    let k = pool.dimension();
    let m = policy.len();
    let mut counts = vec![0usize; m];
    let mut sums = vec![vec![0.0; k]; m];
    let mut squares = vec![vec![0.0; k]; m];
    for (n, s) in pool.iter().enumerate() {
        let i = policy
            .locate(s)
            .ok_or_else(|| Error::Estimation(format!("sample {n} is not covered by the policy")))?;
        counts[i] += 1;
        for j in 0..k {
            sums[i][j] += s[j];
            squares[i][j] += s[j] * s[j];
        }
    }
    let total = pool.len() as f64;
    Ok((0..m)
        .map(|i| {
            let n = counts[i];
            (n > 0).then(|| {
                let nf = n as f64;
                let mean: Vec<f64> = sums[i].iter().map(|s| s / nf).collect();
                let se = (0..k)
                    .map(|j| {
                        if n < 2 {
                            return 0.0;
                        }
                        let var = ((squares[i][j] - nf * mean[j] * mean[j]) / (nf - 1.0)).max(0.0);
                        (var / nf).sqrt()
                    })
                    .collect();
                (nf / total, mean, n, se)
            })
        })
        .collect())
}

/// Signal probabilities and conditional coefficient means under `policy`.
pub fn posterior_summaries(
    prior: &Prior,
    policy: &SignallingPolicy,
    mc: &MonteCarloConfig,
) -> Result<Vec<PosteriorSummary>> {
    Beliefs::new(prior.clone(), mc)?.summaries(policy)
}

/// `E[α]` under the prior.
pub fn prior_mean(prior: &Prior, mc: &MonteCarloConfig) -> Result<Coefficients> {
    Beliefs::new(prior.clone(), mc)?.mean()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square_prior() -> Prior {
        let low = Coefficients::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let high = Coefficients::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        Prior::uniform(BoxSupport::new(low, high).unwrap()).unwrap()
    }

    fn two_atom_prior() -> Prior {
        let low = Coefficients::from_rows(&[[0.0, 0.0], [0.0, 1.0]]).unwrap();
        let high = Coefficients::from_rows(&[[2.0, 0.0], [0.0, 1.0]]).unwrap();
        let atoms = vec![
            Atom {
                values: vec![0.5],
                probability: 0.5,
            },
            Atom {
                values: vec![1.5],
                probability: 0.5,
            },
        ];
        Prior::discrete(BoxSupport::new(low, high).unwrap(), atoms).unwrap()
    }

    fn section_five_prior() -> Prior {
        let low = Coefficients::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let high = Coefficients::from_rows(&[[60.0, 1.0], [1.0, 60.0]]).unwrap();
        Prior::truncated_gaussian(
            BoxSupport::new(low, high).unwrap(),
            vec![30.0, 30.0],
            vec![vec![360.0, 180.0], vec![180.0, 360.0]],
        )
        .unwrap()
    }

    #[test]
    fn uniform_quadrant() {
        let prior = unit_square_prior();
        let policy = uniform_grid_policy(prior.support(), 2).unwrap();
        let s = posterior_summaries(&prior, &policy, &MonteCarloConfig::default()).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s[0].cell_probability, 0.25);
        assert_eq!(s[0].expected_coeffs.get(0, 0), 0.25);
        assert_eq!(s[0].expected_coeffs.get(1, 1), 0.25);
        let mean = prior_mean(&prior, &MonteCarloConfig::default()).unwrap();
        assert_eq!(mean.get(0, 0), 0.5);
        assert_eq!(mean.get(1, 1), 0.5);
    }

    #[test]
    fn discrete_atoms_split_by_cells() {
        let prior = two_atom_prior();
        let policy = uniform_grid_policy(prior.support(), 2).unwrap();
        let s = posterior_summaries(&prior, &policy, &MonteCarloConfig::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].cell_probability, 0.5);
        assert_eq!(s[0].expected_coeffs.row(0), &[0.5, 0.0]);
        assert_eq!(s[1].expected_coeffs.row(0), &[1.5, 0.0]);
        let mean = prior_mean(&prior, &MonteCarloConfig::default()).unwrap();
        assert_eq!(mean.row(0), &[1.0, 0.0]);
        assert_eq!(mean.row(1), &[0.0, 1.0]);
    }

    #[test]
    fn empty_cells_are_dropped() {
        let prior = two_atom_prior();
        let policy = uniform_grid_policy(prior.support(), 8).unwrap();
        let s = posterior_summaries(&prior, &policy, &MonteCarloConfig::default()).unwrap();
        assert_eq!(s.len(), 2);
        let total: f64 = s.iter().map(|c| c.cell_probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncated_gaussian_mean_is_symmetric() {
        let prior = section_five_prior();
        let mc = MonteCarloConfig {
            seed: 7,
            samples: 200_000,
        };
        let beliefs = Beliefs::new(prior, &mc).unwrap();
        let s = beliefs.summaries(&beliefs.no_information()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].cell_probability, 1.0);
        for (j, c) in [(0usize, 0usize), (1, 1)].iter().enumerate() {
            let m = s[0].expected_coeffs.get(c.0, c.1);
            assert!(
                (m - 30.0).abs() <= 3.0 * s[0].standard_error[j],
                "{m} ± {}",
                s[0].standard_error[j]
            );
        }
        let pool = beliefs.pool().unwrap();
        assert!(pool.acceptance_rate() > 0.5);
    }

    #[test]
    fn too_few_survivors_is_an_error() {
        let low = Coefficients::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let high = Coefficients::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let prior = Prior::truncated_gaussian(
            BoxSupport::new(low, high).unwrap(),
            vec![100.0, 100.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        )
        .unwrap();
        let err = Beliefs::new(
            prior,
            &MonteCarloConfig {
                seed: 1,
                samples: 1000,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Estimation(_)));
    }

    #[test]
    fn point_prior_has_one_signal() {
        let alpha = Coefficients::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let beliefs =
            Beliefs::new(Prior::point(alpha.clone()), &MonteCarloConfig::default()).unwrap();
        let policy = beliefs.grid(5).unwrap();
        let s = beliefs.summaries(&policy).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].expected_coeffs, alpha);
    }
}

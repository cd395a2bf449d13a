use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::game::{Coefficients, Network};

/// Position of one coefficient in the `|E| × |D|` grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coordinate {
    pub edge: usize,
    pub slot: usize,
}

/// Smallest axis-aligned box containing the prior's support, given by its
/// lower corner `low` and upper corner `high`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSupport {
    pub low: Coefficients,
    pub high: Coefficients,
}

impl BoxSupport {
    pub fn new(low: Coefficients, high: Coefficients) -> Result<Self> {
        if low.edge_count() != high.edge_count() || low.degree_count() != high.degree_count() {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} upper corner", low.edge_count(), low.degree_count()),
                actual: format!("{}x{}", high.edge_count(), high.degree_count()),
            });
        }
        if low.values().iter().zip(high.values()).any(|(l, h)| l > h) {
            return Err(Error::arg("support lower corner exceeds upper corner"));
        }
        Ok(BoxSupport { low, high })
    }

    /// Degenerate box at a single coefficient vector.
    pub fn point(alpha: Coefficients) -> Self {
        BoxSupport {
            low: alpha.clone(),
            high: alpha,
        }
    }

    /// Coordinates with `low < high`, row-major.
    pub fn random_coordinates(&self) -> Vec<Coordinate> {
        let d = self.low.degree_count();
        (0..self.low.edge_count())
            .flat_map(|edge| (0..d).map(move |slot| Coordinate { edge, slot }))
            .filter(|c| self.low.get(c.edge, c.slot) < self.high.get(c.edge, c.slot))
            .collect()
    }

    pub fn contains(&self, alpha: &Coefficients) -> bool {
        alpha
            .values()
            .iter()
            .zip(self.low.values().iter().zip(self.high.values()))
            .all(|(a, (l, h))| l <= a && a <= h)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    /// Values of the random coordinates, in the prior's coordinate order.
    pub values: Vec<f64>,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PriorKind {
    /// No random coordinates.
    Point,
    UniformBox,
    Discrete(Vec<Atom>),
    /// Multivariate normal over the random coordinates, conditioned on the
    /// support box.
    TruncatedGaussian {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
    },
}

/// Distribution over coefficient vectors.
///
/// Coordinates with `low == high` in the support are fixed; the remaining
/// ("random") coordinates, in row-major order, carry the distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct Prior {
    support: BoxSupport,
    random: Vec<Coordinate>,
    kind: PriorKind,
}

impl Prior {
    pub fn new(support: BoxSupport, kind: PriorKind) -> Result<Self> {
        let random = support.random_coordinates();
        let k = random.len();
        let bounds: Vec<(f64, f64)> = random
            .iter()
            .map(|c| {
                (
                    support.low.get(c.edge, c.slot),
                    support.high.get(c.edge, c.slot),
                )
            })
            .collect();
        match &kind {
            PriorKind::Point | PriorKind::UniformBox => {
                if matches!(kind, PriorKind::Point) && k != 0 {
                    return Err(Error::arg("point prior requires a degenerate support"));
                }
            }
            PriorKind::Discrete(atoms) => {
                if atoms.is_empty() {
                    return Err(Error::arg("discrete prior needs at least one atom"));
                }
                let mut total = 0.0;
                for (i, atom) in atoms.iter().enumerate() {
                    if atom.values.len() != k {
                        return Err(Error::ShapeMismatch {
                            expected: format!("atom over {k} random coordinates"),
                            actual: format!("atom {i} has {} values", atom.values.len()),
                        });
                    }
                    if !(atom.probability >= 0.0) {
                        return Err(Error::arg(format!("atom {i} has negative probability")));
                    }
                    if atom
                        .values
                        .iter()
                        .zip(&bounds)
                        .any(|(v, (l, h))| !(l <= v && v <= h))
                    {
                        return Err(Error::arg(format!("atom {i} lies outside the support")));
                    }
                    total += atom.probability;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::arg(format!(
                        "atom probabilities sum to {total}, expected 1"
                    )));
                }
            }
            PriorKind::TruncatedGaussian { mean, covariance } => {
                if mean.len() != k
                    || covariance.len() != k
                    || covariance.iter().any(|r| r.len() != k)
                {
                    return Err(Error::ShapeMismatch {
                        expected: format!("mean of length {k} and {k}x{k} covariance"),
                        actual: format!("mean of length {}", mean.len()),
                    });
                }
                covariance_factor(covariance)?;
            }
        }
        Ok(Prior {
            support,
            random,
            kind,
        })
    }

    pub fn point(alpha: Coefficients) -> Self {
        Prior {
            support: BoxSupport::point(alpha),
            random: Vec::new(),
            kind: PriorKind::Point,
        }
    }

    pub fn uniform(support: BoxSupport) -> Result<Self> {
        Prior::new(support, PriorKind::UniformBox)
    }

    pub fn discrete(support: BoxSupport, atoms: Vec<Atom>) -> Result<Self> {
        Prior::new(support, PriorKind::Discrete(atoms))
    }

    pub fn truncated_gaussian(
        support: BoxSupport,
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
    ) -> Result<Self> {
        Prior::new(support, PriorKind::TruncatedGaussian { mean, covariance })
    }

    pub fn support(&self) -> &BoxSupport {
        &self.support
    }

    pub fn kind(&self) -> &PriorKind {
        &self.kind
    }

    pub fn random_coordinates(&self) -> &[Coordinate] {
        &self.random
    }

    pub fn dimension(&self) -> usize {
        self.random.len()
    }

    /// Per-coordinate `(low, high)` bounds of the random coordinates.
    pub fn random_bounds(&self) -> Vec<(f64, f64)> {
        self.random
            .iter()
            .map(|c| {
                (
                    self.support.low.get(c.edge, c.slot),
                    self.support.high.get(c.edge, c.slot),
                )
            })
            .collect()
    }

    /// Full coefficient vector with the random coordinates set to `values`.
    pub fn embed(&self, values: &[f64]) -> Coefficients {
        debug_assert_eq!(values.len(), self.random.len());
        let mut alpha = self.support.low.clone();
        for (c, v) in self.random.iter().zip(values) {
            alpha.set(c.edge, c.slot, *v);
        }
        alpha
    }

    pub(crate) fn check_network(&self, network: &Network) -> Result<()> {
        network.check_coefficients(&self.support.low)
    }
}

/// Matrix `F` with `F·Fᵀ = covariance`. Cholesky when positive definite,
/// otherwise a symmetric eigendecomposition with clipped eigenvalues.
pub(crate) fn covariance_factor(covariance: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let k = covariance.len();
    let m = DMatrix::from_fn(k, k, |i, j| covariance[i][j]);
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
    for i in 0..k {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::arg("covariance matrix is not symmetric"));
            }
        }
    }
    if k == 0 {
        return Ok(m);
    }
    if let Some(ch) = m.clone().cholesky() {
        return Ok(ch.unpack());
    }
    let eig = m.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l < -1e-9 * scale) {
        return Err(Error::arg("covariance matrix is not positive semidefinite"));
    }
    let root = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * root)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn support_2d(lo: f64, hi: f64) -> BoxSupport {
        BoxSupport::new(
            Coefficients::from_rows(&[[lo, 1.0], [1.0, lo]]).unwrap(),
            Coefficients::from_rows(&[[hi, 1.0], [1.0, hi]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn random_coordinates_are_row_major_nondegenerate_slots() {
        let s = support_2d(0.0, 60.0);
        assert_eq!(
            s.random_coordinates(),
            vec![
                Coordinate { edge: 0, slot: 0 },
                Coordinate { edge: 1, slot: 1 }
            ]
        );
        let p = Prior::uniform(s).unwrap();
        let a = p.embed(&[3.0, 4.0]);
        assert_eq!(a.values(), &[3.0, 1.0, 1.0, 4.0]);
    }

    #[test]
    fn discrete_validation() {
        let s = support_2d(0.0, 2.0);
        let atom = |v: [f64; 2], p| Atom {
            values: v.to_vec(),
            probability: p,
        };
        assert!(Prior::discrete(
            s.clone(),
            vec![atom([0.5, 1.0], 0.5), atom([1.5, 1.0], 0.5)]
        )
        .is_ok());
        assert!(Prior::discrete(
            s.clone(),
            vec![atom([0.5, 1.0], 0.5), atom([1.5, 1.0], 0.4)]
        )
        .is_err());
        assert!(Prior::discrete(s, vec![atom([2.5, 1.0], 1.0)]).is_err());
    }

    #[test]
    fn covariance_validation() {
        let s = support_2d(0.0, 60.0);
        let good = vec![vec![360.0, 180.0], vec![180.0, 360.0]];
        assert!(Prior::truncated_gaussian(s.clone(), vec![30.0, 30.0], good).is_ok());
        let zero = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        assert!(Prior::truncated_gaussian(s.clone(), vec![30.0, 30.0], zero).is_ok());
        let asym = vec![vec![1.0, 0.5], vec![0.0, 1.0]];
        assert!(Prior::truncated_gaussian(s.clone(), vec![30.0, 30.0], asym).is_err());
        let indefinite = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(Prior::truncated_gaussian(s, vec![30.0, 30.0], indefinite).is_err());
    }

    #[test]
    fn factor_reproduces_covariance() {
        let cov = vec![vec![4.0, 2.0], vec![2.0, 1.0]];
        let f = covariance_factor(&cov).unwrap();
        let back = &f * f.transpose();
        for i in 0..2 {
            for j in 0..2 {
                assert!((back[(i, j)] - cov[i][j]).abs() < 1e-9);
            }
        }
    }
}

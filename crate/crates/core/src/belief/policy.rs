use crate::error::{Error, Result};

use super::prior::BoxSupport;

/// One signal: a closed axis-aligned box over the random coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub label: String,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl Cell {
    pub fn contains(&self, point: &[f64]) -> bool {
        point
            .iter()
            .zip(self.low.iter().zip(&self.high))
            .all(|(x, (l, h))| l <= x && x <= h)
    }

    /// Volume of the intersection with the box `bounds`.
    pub fn overlap(&self, bounds: &[(f64, f64)]) -> f64 {
        self.low
            .iter()
            .zip(&self.high)
            .zip(bounds)
            .map(|((l, h), (bl, bh))| (h.min(*bh) - l.max(*bl)).max(0.0))
            .product()
    }
}

/// Public signalling policy: a partition of the support into boxes.
///
/// A point on a shared face belongs to the first cell (in label order) that
/// contains it. For grid policies this means the lower cell along each axis,
/// which keeps nested grids consistent.
#[derive(Clone, Debug, PartialEq)]
pub struct SignallingPolicy {
    cells: Vec<Cell>,
    /// Per-coordinate cut points `t_0 < … < t_b` for grid policies.
    grid: Option<Vec<Vec<f64>>>,
}

impl SignallingPolicy {
    /// Builds a policy from explicit boxes; they must tile `bounds`.
    pub fn from_cells(bounds: &[(f64, f64)], cells: Vec<Cell>) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::arg("a policy needs at least one cell"));
        }
        let k = bounds.len();
        for c in &cells {
            if c.low.len() != k || c.high.len() != k {
                return Err(Error::ShapeMismatch {
                    expected: format!("cells over {k} random coordinates"),
                    actual: format!("cell {} has {} coordinates", c.label, c.low.len()),
                });
            }
            if c.low.iter().zip(&c.high).any(|(l, h)| !(l <= h)) {
                return Err(Error::arg(format!("cell {} has low > high", c.label)));
            }
        }
        let volume: f64 = bounds.iter().map(|(l, h)| h - l).product();
        let covered: f64 = cells.iter().map(|c| c.overlap(bounds)).sum();
        if (covered - volume).abs() > 1e-9 * volume.max(f64::MIN_POSITIVE) {
            return Err(Error::arg(format!(
                "cells cover volume {covered}, support volume is {volume}"
            )));
        }
        for (i, a) in cells.iter().enumerate() {
            for b in &cells[i + 1..] {
                let inner: Vec<(f64, f64)> =
                    b.low.iter().copied().zip(b.high.iter().copied()).collect();
                if a.overlap(&inner) > 1e-12 * volume {
                    return Err(Error::arg(format!(
                        "cells {} and {} overlap",
                        a.label, b.label
                    )));
                }
            }
        }
        Ok(SignallingPolicy { cells, grid: None })
    }

    /// Single cell spanning the whole support: no information revealed.
    pub fn no_information(bounds: &[(f64, f64)]) -> Self {
        grid_over(bounds, 1)
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Index of the cell a realization falls in.
    pub fn locate(&self, point: &[f64]) -> Option<usize> {
        match &self.grid {
            Some(cuts) => {
                let mut index = 0;
                for (x, t) in point.iter().zip(cuts) {
                    let b = t.len() - 1;
                    if *x < t[0] || *x > t[b] {
                        return None;
                    }
                    // number of interior cuts strictly below x
                    let i = t[1..b].partition_point(|c| c < x);
                    index = index * b + i;
                }
                Some(index)
            }
            None => self.cells.iter().position(|c| c.contains(point)),
        }
    }
}

/// Partitions the support into `b` equal slices along every random
/// coordinate, giving `b^k` cells labelled `(i,j,…)` with 1-based indices.
/// Cells are ordered with the first coordinate most significant.
pub fn uniform_grid_policy(support: &BoxSupport, granularity: usize) -> Result<SignallingPolicy> {
    let bounds: Vec<(f64, f64)> = support
        .random_coordinates()
        .iter()
        .map(|c| {
            (
                support.low.get(c.edge, c.slot),
                support.high.get(c.edge, c.slot),
            )
        })
        .collect();
    grid_policy(&bounds, granularity)
}

/// [`uniform_grid_policy`] over explicit per-coordinate bounds.
pub fn grid_policy(bounds: &[(f64, f64)], granularity: usize) -> Result<SignallingPolicy> {
    if granularity < 1 {
        return Err(Error::arg("grid granularity must be >= 1"));
    }
    let cells = (granularity as f64).powi(bounds.len() as i32);
    if cells > 1e7 {
        return Err(Error::arg(format!("grid would have {cells} cells")));
    }
    Ok(grid_over(bounds, granularity))
}

fn grid_over(bounds: &[(f64, f64)], b: usize) -> SignallingPolicy {
    // low + width·i/b: doubling both i and b is exact in floating point,
    // so cuts of the b-grid reappear bit-for-bit in the 2b-grid.
    let cuts: Vec<Vec<f64>> = bounds
        .iter()
        .map(|(l, h)| {
            (0..=b)
                .map(|i| {
                    if i == b {
                        *h
                    } else {
                        l + (h - l) * i as f64 / b as f64
                    }
                })
                .collect()
        })
        .collect();
    let k = bounds.len();
    let total = b.pow(k as u32);
    let mut cells = Vec::with_capacity(total);
    for flat in 0..total {
        let mut idx = vec![0usize; k];
        let mut rest = flat;
        for j in (0..k).rev() {
            idx[j] = rest % b;
            rest /= b;
        }
        let label = if k == 0 {
            "all".to_string()
        } else {
            let parts: Vec<String> = idx.iter().map(|i| (i + 1).to_string()).collect();
            format!("({})", parts.join(","))
        };
        cells.push(Cell {
            label,
            low: idx.iter().zip(&cuts).map(|(i, t)| t[*i]).collect(),
            high: idx.iter().zip(&cuts).map(|(i, t)| t[*i + 1]).collect(),
        });
    }
    SignallingPolicy {
        cells,
        grid: Some(cuts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_is_the_support() {
        let p = grid_policy(&[(0.0, 60.0), (0.0, 60.0)], 1).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.cells()[0].low, vec![0.0, 0.0]);
        assert_eq!(p.cells()[0].high, vec![60.0, 60.0]);
    }

    #[test]
    fn grid_over_sixty_square() {
        let p = grid_policy(&[(0.0, 60.0), (0.0, 60.0)], 2).unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.cells()[0].low, vec![0.0, 0.0]);
        assert_eq!(p.cells()[0].high, vec![30.0, 30.0]);
        assert_eq!(p.cells()[1].label, "(1,2)");
    }

    #[test]
    fn grid_thirds() {
        let p = grid_policy(&[(0.0, 1.0), (0.0, 1.0)], 3).unwrap();
        assert_eq!(p.len(), 9);
        for c in p.cells() {
            for j in 0..2 {
                assert!((c.high[j] - c.low[j] - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_granularity_rejected() {
        assert!(grid_policy(&[(0.0, 1.0)], 0).is_err());
    }

    #[test]
    fn boundary_points_go_to_lower_cell() {
        let p = grid_policy(&[(0.0, 1.0), (0.0, 1.0)], 2).unwrap();
        assert_eq!(p.locate(&[0.5, 0.5]), Some(0));
        assert_eq!(p.locate(&[0.0, 1.0]), Some(1));
        assert_eq!(p.locate(&[1.0, 1.0]), Some(3));
        assert_eq!(p.locate(&[1.1, 0.0]), None);
        let boxes =
            SignallingPolicy::from_cells(&[(0.0, 1.0), (0.0, 1.0)], p.cells().to_vec()).unwrap();
        for pt in [[0.5, 0.5], [0.25, 0.75], [0.5, 1.0], [0.9, 0.1]] {
            assert_eq!(boxes.locate(&pt), p.locate(&pt));
        }
    }

    #[test]
    fn from_cells_rejects_gaps_and_overlaps() {
        let bounds = [(0.0, 1.0)];
        let cell = |l: f64, h: f64| Cell {
            label: format!("{l}"),
            low: vec![l],
            high: vec![h],
        };
        assert!(
            SignallingPolicy::from_cells(&bounds, vec![cell(0.0, 0.4), cell(0.5, 1.0)]).is_err()
        );
        assert!(
            SignallingPolicy::from_cells(&bounds, vec![cell(0.0, 0.6), cell(0.4, 1.0)]).is_err()
        );
        assert!(
            SignallingPolicy::from_cells(&bounds, vec![cell(0.0, 0.5), cell(0.5, 1.0)]).is_ok()
        );
    }
}

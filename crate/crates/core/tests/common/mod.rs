//! Seeded random instances shared by the integration suites.
#![allow(dead_code)]

use bayes_congestion::belief::{Atom, BoxSupport, Cell, Prior, SignallingPolicy};
use bayes_congestion::game::{Coefficients, DegreeSet, Network};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn network(edges: usize, degrees: &[u32], demand: f64) -> Network {
    Network::new(edges, DegreeSet::new(degrees.to_vec()).unwrap(), demand).unwrap()
}

/// Nonempty random subset of `0..=max_degree`.
pub fn random_degrees(rng: &mut ChaCha8Rng, max_degree: u32) -> Vec<u32> {
    loop {
        let d: Vec<u32> = (0..=max_degree).filter(|_| rng.random_bool(0.5)).collect();
        if !d.is_empty() {
            return d;
        }
    }
}

pub fn random_coefficients(
    rng: &mut ChaCha8Rng,
    network: &Network,
    lo: f64,
    hi: f64,
) -> Coefficients {
    let values = (0..network.coefficient_len())
        .map(|_| rng.random_range(lo..hi))
        .collect();
    Coefficients::new(network.edge_count(), network.degrees().len(), values).unwrap()
}

/// Network with `|E| ∈ edges`, degrees ⊆ {0..=max_degree}, coefficients in
/// `[0.1, 10]` and the given demand.
pub fn random_instance(
    rng: &mut ChaCha8Rng,
    edges: std::ops::RangeInclusive<usize>,
    max_degree: u32,
    demand: f64,
) -> (Network, Coefficients) {
    let e = rng.random_range(edges);
    let d = random_degrees(rng, max_degree);
    let n = network(e, &d, demand);
    let a = random_coefficients(rng, &n, 0.1, 10.0);
    (n, a)
}

/// Support box over `n` with `random` coordinates of positive width and the
/// rest fixed. Lower corner entries are drawn from `[low_min, 2]`.
pub fn random_support(
    rng: &mut ChaCha8Rng,
    n: &Network,
    random: usize,
    low_min: f64,
) -> BoxSupport {
    let len = n.coefficient_len();
    let mut slots: Vec<usize> = (0..len).collect();
    slots.shuffle(rng);
    let chosen = &slots[..random.min(len)];
    let low: Vec<f64> = (0..len).map(|_| rng.random_range(low_min..2.0)).collect();
    let high: Vec<f64> = low
        .iter()
        .enumerate()
        .map(|(i, l)| {
            if chosen.contains(&i) {
                l + rng.random_range(0.1..3.0)
            } else {
                *l
            }
        })
        .collect();
    let d = n.degrees().len();
    BoxSupport::new(
        Coefficients::new(n.edge_count(), d, low).unwrap(),
        Coefficients::new(n.edge_count(), d, high).unwrap(),
    )
    .unwrap()
}

pub fn random_discrete_prior(rng: &mut ChaCha8Rng, support: BoxSupport, atoms: usize) -> Prior {
    let bounds: Vec<(f64, f64)> = Prior::uniform(support.clone()).unwrap().random_bounds();
    let weights: Vec<f64> = (0..atoms).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut atoms: Vec<Atom> = weights
        .iter()
        .map(|w| Atom {
            values: bounds
                .iter()
                .map(|(l, h)| rng.random_range(*l..=*h))
                .collect(),
            probability: w / total,
        })
        .collect();
    // absorb rounding so the probabilities sum to 1 within 1e-12
    let sum: f64 = atoms.iter().map(|a| a.probability).sum();
    atoms[0].probability += 1.0 - sum;
    Prior::discrete(support, atoms).unwrap()
}

/// Guillotine partition: repeatedly split a random cell along a random axis.
pub fn random_partition(
    rng: &mut ChaCha8Rng,
    bounds: &[(f64, f64)],
    splits: usize,
) -> SignallingPolicy {
    let mut cells = vec![(
        bounds.iter().map(|b| b.0).collect::<Vec<_>>(),
        bounds.iter().map(|b| b.1).collect::<Vec<_>>(),
    )];
    for _ in 0..splits {
        if bounds.is_empty() {
            break;
        }
        let i = rng.random_range(0..cells.len());
        let axis = rng.random_range(0..bounds.len());
        let (low, high) = cells[i].clone();
        let cut = rng.random_range(low[axis]..high[axis]);
        let mut left_high = high.clone();
        left_high[axis] = cut;
        let mut right_low = low.clone();
        right_low[axis] = cut;
        cells[i] = (low, left_high);
        cells.push((right_low, high));
    }
    let cells = cells
        .into_iter()
        .enumerate()
        .map(|(i, (low, high))| Cell {
            label: format!("c{i}"),
            low,
            high,
        })
        .collect();
    SignallingPolicy::from_cells(bounds, cells).unwrap()
}

//! Shared test oracles.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uclab::coupling::coupled_union_prob;
use uclab::measure::DiscreteMeasure;
use uclab::scalar::binary_entropy;

/// Minimum of `Σ W_ij c_ij` over couplings of `w` with itself, by visiting
/// every basic solution: each spanning tree of `2m − 1` cells of the
/// bipartite row/column graph determines one plan, kept if nonnegative.
pub fn vertex_enumeration_min(w: &[f64], cost: &[f64]) -> f64 {
    let m = w.len();
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
    let k = 2 * m - 1;
    let mut best = f64::INFINITY;
    for subset in 0u32..(1 << cells.len()) {
        if subset.count_ones() as usize != k {
            continue;
        }
        let chosen: Vec<(usize, usize)> = (0..cells.len()).filter(|&c| subset >> c & 1 == 1).map(|c| cells[c]).collect();
        if let Some(plan) = tree_plan(m, w, &chosen) {
            if plan.iter().all(|&(_, x)| x >= -1e-14) {
                let v: f64 = plan.iter().map(|&((i, j), x)| x * cost[i * m + j]).sum();
                best = best.min(v);
            }
        }
    }
    best
}

/// Flows on a spanning tree by repeatedly settling a leaf; `None` if the
/// cells do not form a spanning tree.
fn tree_plan(m: usize, w: &[f64], chosen: &[(usize, usize)]) -> Option<Vec<((usize, usize), f64)>> {
    let mut remaining: Vec<f64> = w.iter().chain(w.iter()).copied().collect();
    let mut alive: Vec<bool> = vec![true; chosen.len()];
    let mut plan = Vec::new();
    for _ in 0..chosen.len() {
        let degree = |node: usize, alive: &[bool]| {
            chosen
                .iter()
                .enumerate()
                .filter(|&(e, &(i, j))| alive[e] && (i == node || m + j == node))
                .count()
        };
        let leaf = (0..2 * m).find(|&node| degree(node, &alive) == 1)?;
        let e = (0..chosen.len()).find(|&e| alive[e] && (chosen[e].0 == leaf || m + chosen[e].1 == leaf))?;
        let (i, j) = chosen[e];
        let other = if i == leaf { m + j } else { i };
        let x = remaining[leaf];
        remaining[leaf] = 0.0;
        remaining[other] -= x;
        alive[e] = false;
        plan.push(((i, j), x));
    }
    if remaining.iter().all(|r| r.abs() < 1e-12) {
        Some(plan)
    } else {
        None
    }
}

pub fn coupling_cost(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .flat_map(|&p| xs.iter().map(move |&r| binary_entropy(coupled_union_prob(p, r).unwrap()).unwrap()))
        .collect()
}

/// Deterministic battery of 2- and 3-atom measures: a grid of 2-atom
/// measures (including atoms at 0, 1/2 and 1) and seeded random 3-atom ones.
pub fn small_measure_battery(random_three: usize, seed: u64) -> Vec<DiscreteMeasure> {
    let locs = [0.0, 0.05, 0.2, 0.3, 0.381_966_011_250_105_1, 0.45, 0.5, 0.6, 0.8, 1.0];
    let mut out = Vec::new();
    for (a, &x) in locs.iter().enumerate() {
        for &y in &locs[a + 1..] {
            for w in [0.1, 0.3, 0.5, 0.7, 0.9] {
                out.push(DiscreteMeasure::new([(x, w), (y, 1.0 - w)]).unwrap());
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random_three {
        let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let xs: Vec<f64> = (0..3).map(|_| if rng.gen_bool(0.1) { 1.0 } else { rng.gen::<f64>() }).collect();
        out.push(DiscreteMeasure::new(xs.into_iter().zip(raw.iter().map(|r| r / total))).unwrap());
    }
    out
}

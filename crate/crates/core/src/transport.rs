//! Dense transportation simplex: minimize `Σ c_ij x_ij` subject to
//! `Σ_j x_ij = supply_i`, `Σ_i x_ij = demand_j`, `x ≥ 0`.
//!
//! The basis is a spanning tree on the bipartite row/column graph with
//! `m + n − 1` cells (degenerate cells carry zero flow). Initial basis from the
//! north-west corner rule, pivots by most negative reduced cost, falling back
//! to the first negative reduced cost after a run of degenerate pivots.

use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TransportSolution {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows × cols` plan.
    pub plan: Vec<f64>,
    pub cost: f64,
    pub pivots: usize,
}

impl TransportSolution {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.plan[i * self.cols + j]
    }
}

const DEGENERATE_RUN: usize = 50;

pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportSolution> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 || cost.len() != m * n {
        return Err(Error::InvalidParams("transport problem dimensions do not match".into()));
    }
    if supply.iter().chain(demand).any(|v| !v.is_finite() || *v < 0.0) || cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParams("transport data must be finite, masses nonnegative".into()));
    }
    let (ts, td): (f64, f64) = (supply.iter().sum(), demand.iter().sum());
    if (ts - td).abs() > 1e-9 * ts.max(1.0) {
        return Err(Error::Solver("supply and demand totals differ"));
    }

    let mut plan = vec![0.0; m * n];
    let mut basic = vec![false; m * n];
    let mut cells: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);
    {
        let (mut s, mut d) = (supply.to_vec(), demand.to_vec());
        let (mut i, mut j) = (0, 0);
        loop {
            let x = s[i].min(d[j]);
            plan[i * n + j] = x;
            basic[i * n + j] = true;
            cells.push((i, j));
            s[i] -= x;
            d[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if j == n - 1 || (i < m - 1 && s[i] <= d[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let scale = cost.iter().fold(0.0f64, |a, c| a.max(c.abs())).max(1.0);
    let tol = 1e-12 * scale;
    let max_pivots = 50 * (m * n + m + n);
    let mut pivots = 0;
    let mut degenerate_run = 0;
    let mut row_pot = vec![0.0; m];
    let mut col_pot = vec![0.0; n];

    loop {
        // adjacency of the basis tree: nodes 0..m rows, m..m+n columns
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m + n];
        for &(i, j) in &cells {
            adj[i].push(m + j);
            adj[m + j].push(i);
        }
        // potentials: u_i + v_j = c_ij on basic cells
        let mut seen = vec![false; m + n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        row_pot[0] = 0.0;
        while let Some(node) = queue.pop_front() {
            for &next in &adj[node] {
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                if node < m {
                    col_pot[next - m] = cost[node * n + (next - m)] - row_pot[node];
                } else {
                    row_pot[next] = cost[next * n + (node - m)] - col_pot[node - m];
                }
                queue.push_back(next);
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Solver("basis is not a spanning tree"));
        }

        let bland = degenerate_run >= DEGENERATE_RUN;
        let mut entering: Option<(usize, usize, f64)> = None;
        'scan: for i in 0..m {
            for j in 0..n {
                if basic[i * n + j] {
                    continue;
                }
                let reduced = cost[i * n + j] - row_pot[i] - col_pot[j];
                if reduced < -tol && entering.is_none_or(|(_, _, r)| reduced < r) {
                    entering = Some((i, j, reduced));
                    if bland {
                        break 'scan;
                    }
                }
            }
        }
        let Some((ei, ej, _)) = entering else {
            break;
        };
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Solver("transportation simplex did not converge"));
        }

        // tree path from column ej to row ei
        let mut parent = vec![usize::MAX; m + n];
        let start = m + ej;
        parent[start] = start;
        let mut queue = VecDeque::from([start]);
        while let Some(node) = queue.pop_front() {
            if node == ei {
                break;
            }
            for &next in &adj[node] {
                if parent[next] == usize::MAX {
                    parent[next] = node;
                    queue.push_back(next);
                }
            }
        }
        let mut path_cells: Vec<(usize, usize)> = Vec::new();
        let mut node = ei;
        while node != start {
            let prev = parent[node];
            let cell = if node < m { (node, prev - m) } else { (prev, node - m) };
            path_cells.push(cell);
            node = prev;
        }
        // walking back from ei, the cells alternate −, +, −, … and end with −
        let (mut theta, mut leaving) = (f64::INFINITY, None);
        for (k, &(i, j)) in path_cells.iter().enumerate() {
            if k % 2 == 0 && plan[i * n + j] < theta {
                theta = plan[i * n + j];
                leaving = Some((i, j));
            }
        }
        let (li, lj) = leaving.ok_or(Error::Solver("no leaving cell"))?;
        for (k, &(i, j)) in path_cells.iter().enumerate() {
            if k % 2 == 0 {
                plan[i * n + j] = (plan[i * n + j] - theta).max(0.0);
            } else {
                plan[i * n + j] += theta;
            }
        }
        plan[ei * n + ej] = theta;
        plan[li * n + lj] = 0.0;
        basic[li * n + lj] = false;
        basic[ei * n + ej] = true;
        let pos = cells.iter().position(|&c| c == (li, lj)).expect("leaving cell is basic");
        cells[pos] = (ei, ej);
        degenerate_run = if theta == 0.0 { degenerate_run + 1 } else { 0 };
    }

    let cost_value = plan.iter().zip(cost).map(|(x, c)| x * c).sum();
    Ok(TransportSolution { rows: m, cols: n, plan, cost: cost_value, pivots })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignment_like_problem() {
        // identity costs reward the anti-diagonal
        let cost = [1.0, 0.0, 0.0, 1.0];
        let sol = solve_transport(&[0.5, 0.5], &[0.5, 0.5], &cost).unwrap();
        assert_eq!(sol.cost, 0.0);
        assert_eq!(sol.at(0, 1), 0.5);
        assert_eq!(sol.at(1, 0), 0.5);
    }

    #[test]
    fn marginals_are_preserved() {
        let supply = [0.2, 0.3, 0.5];
        let demand = [0.6, 0.1, 0.3];
        let cost = [4.0, 1.0, 3.0, 2.0, 0.5, 7.0, 1.0, 3.0, 2.0];
        let sol = solve_transport(&supply, &demand, &cost).unwrap();
        for i in 0..3 {
            let row: f64 = (0..3).map(|j| sol.at(i, j)).sum();
            assert!((row - supply[i]).abs() < 1e-15);
        }
        for j in 0..3 {
            let col: f64 = (0..3).map(|i| sol.at(i, j)).sum();
            assert!((col - demand[j]).abs() < 1e-15);
        }
        assert!(sol.plan.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn rejects_unbalanced_problem() {
        assert!(solve_transport(&[1.0], &[0.5], &[0.0]).is_err());
        assert!(solve_transport(&[1.0], &[1.0], &[0.0, 1.0]).is_err());
    }
}

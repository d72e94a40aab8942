//! Finitely supported probability measures on [0, 1] and the functional
//!
//! ```text
//! Φ_λ(μ) = E_{p,q ~ μ⊗μ}[H(p + q − pq)] − λ·E_{p ~ μ}[H(p)]
//! ```
//!
//! over measures with mean at most `u`. Nonnegativity of Φ at `λ = λ(u)` is
//! the inequality certified here, through a closed-form scan of the two-atom
//! family and an independent local search over gridded measures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_open_prob, check_prob, Error, Result};
use crate::numeric::{central_second, compensated_sum, open_unit_grid, rel_err};
use crate::scalar::{h, h_union, lambda_unchecked, GOLDEN_THRESHOLD, PHI};

const NORMALIZATION_TOL: f64 = 1e-12;

/// Slack threshold for closed-form scans.
pub const SCAN_TOL: f64 = 1e-9;
/// Slack threshold for search-based checks.
pub const SEARCH_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// Probability measure on [0, 1] with finitely many atoms, stored with
/// strictly increasing locations and positive weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    /// Sorts atoms, merges equal locations and drops zero weights.
    pub fn new<I: IntoIterator<Item = (f64, f64)>>(atoms: I) -> Result<Self> {
        let mut list: Vec<Atom> = Vec::new();
        for (location, weight) in atoms {
            check_prob("location", location)?;
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::Domain { what: "weight", value: weight, domain: "[0, inf)" });
            }
            list.push(Atom { location, weight });
        }
        let total = compensated_sum(list.iter().map(|a| a.weight));
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Normalization(total));
        }
        list.sort_by(|a, b| a.location.total_cmp(&b.location));
        let mut merged: Vec<Atom> = Vec::with_capacity(list.len());
        for a in list.into_iter().filter(|a| a.weight > 0.0) {
            match merged.last_mut() {
                Some(last) if last.location == a.location => last.weight += a.weight,
                _ => merged.push(a),
            }
        }
        Ok(Self { atoms: merged })
    }

    pub fn dirac(x: f64) -> Result<Self> {
        Self::new([(x, 1.0)])
    }

    /// Mass `w` at `v` and `1 − w` at 1.
    pub fn two_atom(v: f64, w: f64) -> Result<Self> {
        let w = check_prob("w", w)?;
        Self::new([(v, w), (1.0, 1.0 - w)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Supported on {0, 1}.
    pub fn is_degenerate(&self) -> bool {
        self.atoms.iter().all(|a| a.location == 0.0 || a.location == 1.0)
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.weight * a.location))
    }

    /// `E_μ[H(p)]`.
    pub fn linear_term(&self) -> f64 {
        compensated_sum(self.atoms.iter().map(|a| a.weight * h(a.location)))
    }

    /// `E_{μ⊗μ}[H(p + q − pq)]`.
    pub fn quadratic_term(&self) -> f64 {
        cross_term(self, self)
    }
}

fn cross_term(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    compensated_sum(mu.atoms.iter().flat_map(|a| {
        nu.atoms
            .iter()
            .map(move |b| a.weight * b.weight * h_union(a.location, b.location))
    }))
}

pub fn mean(mu: &DiscreteMeasure) -> f64 {
    mu.mean()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveReport {
    pub quadratic: f64,
    pub linear: f64,
    pub lambda: f64,
    pub value: f64,
    pub mean: f64,
}

/// `Φ_λ(μ)` together with its parts.
pub fn objective(mu: &DiscreteMeasure, lambda: f64) -> ObjectiveReport {
    let quadratic = mu.quadratic_term();
    let linear = mu.linear_term();
    ObjectiveReport {
        quadratic,
        linear,
        lambda,
        value: quadratic - lambda * linear,
        mean: mu.mean(),
    }
}

/// `2·E_{μ⊗ν}[H(p + q − pq)] − λ·E_ν[H(q)]`, the first variation of Φ at μ
/// in the direction of ν.
pub fn linearized_objective(mu: &DiscreteMeasure, nu: &DiscreteMeasure, lambda: f64) -> f64 {
    2.0 * cross_term(mu, nu) - lambda * nu.linear_term()
}

/// Φ for mass `w` at `v` and `1 − w` at 1: `w²·H(2v − v²) − λ·w·H(v)`.
pub fn two_atom_objective(v: f64, w: f64, lambda: f64) -> Result<f64> {
    let v = check_open_prob("v", v)?;
    let w = check_prob("w", w)?;
    Ok(two_atom_value(v, w, lambda))
}

#[inline]
fn two_atom_value(v: f64, w: f64, lambda: f64) -> f64 {
    w * w * h_union(v, v) - lambda * w * h(v)
}

/// The measure attaining Φ = 0 at `λ = λ(u)`.
pub fn sharp_measure(u: f64) -> Result<DiscreteMeasure> {
    let u = check_open_prob("u", u)?;
    if u <= GOLDEN_THRESHOLD {
        DiscreteMeasure::dirac(u)
    } else {
        DiscreteMeasure::two_atom(GOLDEN_THRESHOLD, ((1.0 - u) * PHI).min(1.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoAtomScan {
    pub u: f64,
    pub lambda: f64,
    pub v_steps: usize,
    pub min_slack: f64,
    pub argmin_v: f64,
    pub argmin_w: f64,
}

/// Scans `v` over `(0, u]` with the mean pinned at `u` (`w = (1−u)/(1−v)`),
/// at `λ = λ(u)`.
pub fn two_atom_min_scan(u: f64, v_steps: usize) -> Result<TwoAtomScan> {
    let u = check_open_prob("u", u)?;
    two_atom_min_scan_with_lambda(u, v_steps, lambda_unchecked(u))
}

/// [`two_atom_min_scan`] with an explicit λ.
pub fn two_atom_min_scan_with_lambda(u: f64, v_steps: usize, lambda: f64) -> Result<TwoAtomScan> {
    let u = check_open_prob("u", u)?;
    if v_steps == 0 {
        return Err(Error::InvalidParams("v_steps must be positive".into()));
    }
    let grid = (1..=v_steps).map(|k| u * k as f64 / v_steps as f64);
    let special = (GOLDEN_THRESHOLD < u).then_some(GOLDEN_THRESHOLD);
    let mut best = (f64::INFINITY, u, 1.0);
    for v in grid.chain(special) {
        let w = ((1.0 - u) / (1.0 - v)).min(1.0);
        let value = two_atom_value(v, w, lambda);
        if value < best.0 {
            best = (value, v, w);
        }
    }
    Ok(TwoAtomScan {
        u,
        lambda,
        v_steps,
        min_slack: best.0,
        argmin_v: best.1,
        argmin_w: best.2,
    })
}

/// `F_μ(q) = 2·E_μ[H(p + q − pq)] − λ·H(q)`.
pub fn f_mu(mu: &DiscreteMeasure, lambda: f64, q: f64) -> Result<f64> {
    let q = check_open_prob("q", q)?;
    Ok(f_mu_value(mu, lambda, q))
}

fn f_mu_value(mu: &DiscreteMeasure, lambda: f64, q: f64) -> f64 {
    2.0 * compensated_sum(mu.atoms.iter().map(|a| a.weight * h_union(a.location, q))) - lambda * h(q)
}

/// Closed form of `q(1−q)·F_μ''(q) = −2·E_μ[(1−p)q/(p + q − pq)] + λ`.
pub fn scaled_curvature(mu: &DiscreteMeasure, lambda: f64, q: f64) -> f64 {
    -2.0 * compensated_sum(
        mu.atoms
            .iter()
            .map(|a| a.weight * (1.0 - a.location) * q / (a.location + q - a.location * q)),
    ) + lambda
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureShape {
    /// Convex on `[0, a)`, concave on `(a, 1]`.
    ConvexThenConcave,
    Convex,
    Concave,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub grid: usize,
    pub strictly_decreasing: bool,
    pub shape: CurvatureShape,
    pub inflection: Option<f64>,
    /// Second differences of `F_μ` agree in sign with the closed form wherever
    /// the closed form is away from zero.
    pub convexity_consistent: bool,
    /// Largest `|fd − G| / max(|G|, 1)` over grid points in [0.05, 0.95].
    pub fd_max_rel_err: f64,
}

const FD_STEP: f64 = 1e-4;

/// Checks the convex-then-concave structure of `F_μ` on a grid of (0, 1).
pub fn f_mu_structure_check(mu: &DiscreteMeasure, lambda: f64, grid: usize) -> Result<StructureReport> {
    if mu.is_degenerate() {
        return Err(Error::Degenerate("measure supported on {0, 1}"));
    }
    if grid < 2 {
        return Err(Error::InvalidParams("grid needs at least two points".into()));
    }
    let qs: Vec<f64> = open_unit_grid(grid).collect();
    let g: Vec<f64> = qs.iter().map(|&q| scaled_curvature(mu, lambda, q)).collect();
    let strictly_decreasing = g.windows(2).all(|w| w[1] < w[0]);

    let curvature = |q: f64| scaled_curvature(mu, lambda, q);
    let (lo, hi) = (curvature(1e-12), curvature(1.0 - 1e-12));
    let (shape, inflection) = if lo > 0.0 && hi < 0.0 {
        let (mut a, mut b) = (1e-12, 1.0 - 1e-12);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if curvature(mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        (CurvatureShape::ConvexThenConcave, Some(0.5 * (a + b)))
    } else if hi >= 0.0 {
        (CurvatureShape::Convex, None)
    } else {
        (CurvatureShape::Concave, None)
    };

    let f = |q: f64| f_mu_value(mu, lambda, q);
    let mut convexity_consistent = true;
    let mut fd_max_rel_err: f64 = 0.0;
    for (&q, &gq) in qs.iter().zip(&g) {
        let step = FD_STEP.min(0.5 * q.min(1.0 - q));
        let fd = central_second(f, q, step) * q * (1.0 - q);
        if gq.abs() > 1e-3 && fd.signum() != gq.signum() {
            convexity_consistent = false;
        }
        if (0.05..=0.95).contains(&q) {
            fd_max_rel_err = fd_max_rel_err.max(rel_err(fd, gq, 1.0));
        }
    }
    Ok(StructureReport {
        grid,
        strictly_decreasing,
        shape,
        inflection,
        convexity_consistent,
        fd_max_rel_err,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalSearchReport {
    pub u: f64,
    pub lambda: f64,
    pub atom_grid: usize,
    pub restarts: usize,
    pub seed: u64,
    pub best_value: f64,
    pub best_measure: DiscreteMeasure,
    pub best_mean: f64,
    /// At least `1 − 1e-3` of the mass sits on one location plus the point 1.
    pub concentrated: bool,
    pub iterations: usize,
}

const MAX_ITERATIONS: usize = 2000;

/// Locations used by the local search: a uniform grid plus the exact points
/// `u`, the golden threshold and 1.
pub fn search_locations(u: f64, atom_grid: usize) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..=atom_grid)
        .map(|k| k as f64 / atom_grid as f64)
        .chain([u, GOLDEN_THRESHOLD, 1.0])
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Vertex {
    Single(usize),
    /// Weight `a` on the first location and `1 − a` on the second.
    Pair(usize, usize, f64),
}

impl Vertex {
    fn for_each(self, mut f: impl FnMut(usize, f64)) {
        match self {
            Vertex::Single(i) => f(i, 1.0),
            Vertex::Pair(i, j, a) => {
                f(i, a);
                f(j, 1.0 - a);
            }
        }
    }

    fn dot(self, g: &[f64]) -> f64 {
        let mut s = 0.0;
        self.for_each(|i, a| s += a * g[i]);
        s
    }
}

/// Minimizer of `g·w` over measures on `xs` with mean at most `u`: evaluate
/// the lower convex envelope of `(x, g)` at `min(u, argmin)`. Ties go to the
/// larger location.
fn linear_oracle(xs: &[f64], g: &[f64], u: f64) -> Vertex {
    let mut hull: Vec<usize> = Vec::new();
    for k in 0..xs.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (xs[b] - xs[a]) * (g[k] - g[a]) - (g[b] - g[a]) * (xs[k] - xs[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(k);
    }
    let best = hull
        .iter()
        .copied()
        .filter(|&k| xs[k] <= u)
        .fold(None, |acc: Option<usize>, k| match acc {
            Some(b) if g[b] < g[k] => Some(b),
            _ => Some(k),
        })
        .expect("location 0 is always feasible");
    let pos = hull.iter().position(|&k| k == best).expect("on hull");
    if let Some(&next) = hull.get(pos + 1) {
        if xs[next] > u && g[next] < g[best] {
            let a = (xs[next] - u) / (xs[next] - xs[best]);
            return Vertex::Pair(best, next, a);
        }
    }
    Vertex::Single(best)
}

struct SearchProblem<'a> {
    xs: &'a [f64],
    hs: Vec<f64>,
    lambda: f64,
    u: f64,
}

impl SearchProblem<'_> {
    fn column<'c>(&self, cache: &'c mut [Option<Vec<f64>>], k: usize) -> &'c [f64] {
        cache[k].get_or_insert_with(|| self.xs.iter().map(|&x| h_union(x, self.xs[k])).collect())
    }

    fn run(&self, start: Vec<(Vertex, f64)>) -> (Vec<f64>, usize) {
        let n = self.xs.len();
        let mut cache: Vec<Option<Vec<f64>>> = vec![None; n];
        let mut active = start;
        let mut iterations = 0;
        let mut w = vec![0.0; n];
        for _ in 0..MAX_ITERATIONS {
            iterations += 1;
            w.iter_mut().for_each(|x| *x = 0.0);
            for &(v, c) in &active {
                v.for_each(|i, a| w[i] += c * a);
            }
            let mut g: Vec<f64> = self.hs.iter().map(|&hk| -self.lambda * hk).collect();
            for k in 0..n {
                if w[k] > 0.0 {
                    let wk = w[k];
                    let col = self.column(&mut cache, k);
                    g.iter_mut().zip(col).for_each(|(gi, &m)| *gi += 2.0 * wk * m);
                }
            }
            let toward = linear_oracle(self.xs, &g, self.u);
            let (away_idx, away) = active
                .iter()
                .enumerate()
                .map(|(k, &(v, _))| (k, v))
                .max_by(|a, b| a.1.dot(&g).total_cmp(&b.1.dot(&g)))
                .expect("active set is nonempty");
            let slope = toward.dot(&g) - away.dot(&g);
            if slope > -1e-15 {
                break;
            }
            // curvature dᵀMd for d = toward − away
            let mut d: Vec<(usize, f64)> = Vec::with_capacity(4);
            toward.for_each(|i, a| d.push((i, a)));
            away.for_each(|i, a| d.push((i, -a)));
            let curvature: f64 = d
                .iter()
                .flat_map(|&(i, a)| d.iter().map(move |&(j, b)| (i, j, a * b)))
                .map(|(i, j, ab)| ab * h_union(self.xs[i], self.xs[j]))
                .sum();
            let max_step = active[away_idx].1;
            let step = if curvature > 0.0 {
                (-slope / (2.0 * curvature)).min(max_step)
            } else {
                max_step
            };
            if step <= 0.0 {
                break;
            }
            active[away_idx].1 -= step;
            match active.iter_mut().find(|(v, _)| *v == toward) {
                Some(entry) => entry.1 += step,
                None => active.push((toward, step)),
            }
            active.retain(|&(_, c)| c > 1e-300);
        }
        w.iter_mut().for_each(|x| *x = 0.0);
        for &(v, c) in &active {
            v.for_each(|i, a| w[i] += c * a);
        }
        (w, iterations)
    }
}

/// Local minimization of Φ_λ over measures on [`search_locations`] with mean
/// at most `u`, by pairwise exchange moves between feasible extreme measures,
/// started from `restarts` seeded random measures.
pub fn local_search_min(u: f64, lambda: f64, atom_grid: usize, restarts: usize, seed: u64) -> Result<LocalSearchReport> {
    let u = check_open_prob("u", u)?;
    if atom_grid == 0 || restarts == 0 {
        return Err(Error::InvalidParams("atom_grid and restarts must be positive".into()));
    }
    let xs = search_locations(u, atom_grid);
    let problem = SearchProblem { hs: xs.iter().map(|&x| h(x)).collect(), xs: &xs, lambda, u };
    let feasible: Vec<usize> = (0..xs.len()).filter(|&k| xs[k] <= u).collect();
    let above: Vec<usize> = (0..xs.len()).filter(|&k| xs[k] > u).collect();

    let runs: Vec<(f64, DiscreteMeasure, usize)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
            let count = rng.gen_range(1..=3);
            let mut start: Vec<(Vertex, f64)> = (0..count)
                .map(|_| {
                    let i = feasible[rng.gen_range(0..feasible.len())];
                    let vertex = if rng.gen_bool(0.5) && xs[i] < u {
                        let j = above[rng.gen_range(0..above.len())];
                        Vertex::Pair(i, j, (xs[j] - u) / (xs[j] - xs[i]))
                    } else {
                        Vertex::Single(i)
                    };
                    (vertex, -rng.gen::<f64>().max(1e-12).ln())
                })
                .collect();
            let total: f64 = start.iter().map(|s| s.1).sum();
            start.iter_mut().for_each(|s| s.1 /= total);
            let (w, iterations) = problem.run(start);
            let mu = measure_from_weights(&xs, &w);
            (objective(&mu, lambda).value, mu, iterations)
        })
        .collect();

    let iterations = runs.iter().map(|r| r.2).sum();
    let (best_value, best_measure, _) = runs
        .into_iter()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .expect("at least one restart");
    Ok(LocalSearchReport {
        u,
        lambda,
        atom_grid,
        restarts,
        seed,
        best_value,
        best_mean: best_measure.mean(),
        concentrated: is_concentrated(&best_measure),
        best_measure,
        iterations,
    })
}

fn measure_from_weights(xs: &[f64], w: &[f64]) -> DiscreteMeasure {
    let total: f64 = compensated_sum(w.iter().copied());
    DiscreteMeasure::new(
        xs.iter()
            .zip(w)
            .filter(|(_, &wk)| wk > 1e-15)
            .map(|(&x, &wk)| (x, wk / total)),
    )
    .expect("weights come from a convex combination")
}

fn is_concentrated(mu: &DiscreteMeasure) -> bool {
    let at_one: f64 = mu.atoms.iter().filter(|a| a.location == 1.0).map(|a| a.weight).sum();
    let other = mu
        .atoms
        .iter()
        .filter(|a| a.location != 1.0)
        .map(|a| a.weight)
        .fold(0.0, f64::max);
    at_one + other >= 1.0 - 1e-3
}

/// Parameters of [`lemma_certificate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaOptions {
    pub u_steps: usize,
    pub v_steps: usize,
    pub atom_grid: usize,
    /// Number of u-grid points that also get a local search.
    pub local_points: usize,
    pub restarts_per_point: usize,
    pub seed: u64,
    /// Multiplier applied to λ(u); 1 for the genuine certificate.
    pub lambda_scale: f64,
    /// The scan passes when its worst slack is at least `−scan_tol`.
    pub scan_tol: f64,
}

impl Default for LemmaOptions {
    fn default() -> Self {
        Self {
            u_steps: 1000,
            v_steps: 1000,
            atom_grid: 1000,
            local_points: 100,
            restarts_per_point: 10,
            seed: crate::DEFAULT_SEED,
            lambda_scale: 1.0,
            scan_tol: SCAN_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateRow {
    pub u: f64,
    pub lambda: f64,
    pub scan_min_slack: f64,
    pub argmin_v: f64,
    pub local_best: Option<f64>,
    pub local_concentrated: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCertificate {
    pub options: LemmaOptions,
    pub worst_slack: f64,
    pub worst_u: f64,
    pub golden_slack: f64,
    pub local_restarts: usize,
    pub worst_local_value: f64,
    /// Largest amount by which a local search undercuts the scan at the same u.
    pub max_local_advantage: f64,
    pub scan_ok: bool,
    pub local_ok: bool,
    pub passed: bool,
    pub rows: Vec<CertificateRow>,
}

/// Runs the two-atom scan over a u-grid of (0, 1) (plus the golden
/// threshold) and local searches on an evenly spaced subset of it.
pub fn lemma_certificate(opts: &LemmaOptions) -> Result<LemmaCertificate> {
    if opts.u_steps == 0 || opts.v_steps == 0 || !(opts.scan_tol > 0.0) {
        return Err(Error::InvalidParams("u_steps, v_steps and scan_tol must be positive".into()));
    }
    let mut us: Vec<f64> = open_unit_grid(opts.u_steps).chain([GOLDEN_THRESHOLD]).collect();
    us.sort_by(f64::total_cmp);
    us.dedup();
    let stride = if opts.local_points == 0 {
        usize::MAX
    } else {
        opts.u_steps.div_ceil(opts.local_points).max(1)
    };
    let rows: Vec<CertificateRow> = us
        .par_iter()
        .enumerate()
        .map(|(k, &u)| -> Result<CertificateRow> {
            let lambda = lambda_unchecked(u) * opts.lambda_scale;
            let scan = two_atom_min_scan_with_lambda(u, opts.v_steps, lambda)?;
            let local = if k % stride == stride / 2 && opts.restarts_per_point > 0 {
                let seed = opts.seed.wrapping_add((k as u64) << 20);
                Some(local_search_min(u, lambda, opts.atom_grid, opts.restarts_per_point, seed)?)
            } else {
                None
            };
            Ok(CertificateRow {
                u,
                lambda,
                scan_min_slack: scan.min_slack,
                argmin_v: scan.argmin_v,
                local_best: local.as_ref().map(|l| l.best_value),
                local_concentrated: local.as_ref().map(|l| l.concentrated),
            })
        })
        .collect::<Result<_>>()?;

    let worst = rows
        .iter()
        .min_by(|a, b| a.scan_min_slack.total_cmp(&b.scan_min_slack))
        .expect("nonempty grid");
    let golden_slack = rows
        .iter()
        .find(|r| r.u == GOLDEN_THRESHOLD)
        .map(|r| r.scan_min_slack)
        .expect("golden threshold injected");
    let local_rows: Vec<&CertificateRow> = rows.iter().filter(|r| r.local_best.is_some()).collect();
    let worst_local_value = local_rows
        .iter()
        .filter_map(|r| r.local_best)
        .fold(f64::INFINITY, f64::min);
    let max_local_advantage = local_rows
        .iter()
        .map(|r| r.scan_min_slack - r.local_best.unwrap_or(f64::INFINITY))
        .fold(f64::NEG_INFINITY, f64::max);
    let scan_ok = worst.scan_min_slack >= -opts.scan_tol;
    let local_ok = local_rows.is_empty() || (max_local_advantage <= SEARCH_TOL && worst_local_value >= -SEARCH_TOL);
    Ok(LemmaCertificate {
        worst_slack: worst.scan_min_slack,
        worst_u: worst.u,
        golden_slack,
        local_restarts: local_rows.len() * opts.restarts_per_point,
        worst_local_value,
        max_local_advantage,
        scan_ok,
        local_ok,
        passed: scan_ok && local_ok,
        options: opts.clone(),
        rows,
    })
}

/// Tolerance for the value of Φ at sharp measures.
pub const SHARPNESS_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharpnessReport {
    pub grid: usize,
    /// Largest `|Φ_{λ(u)}(δ_u)|` over grid points `u ≤ u*`.
    pub max_dirac_value: f64,
    /// Largest `|Φ_{λ(u)}(sharp_measure(u))|` over grid points `u ≥ u*`.
    pub max_two_atom_value: f64,
    pub passed: bool,
}

/// Evaluates Φ at the minimizers `δ_u` (for `u ≤ u*`) and `sharp_measure(u)`
/// (for `u ≥ u*`) on `grid` interior points of (0, 1) plus u*.
pub fn sharpness_check(grid: usize, tol: f64) -> Result<SharpnessReport> {
    let mut max_dirac_value = 0.0f64;
    let mut max_two_atom_value = 0.0f64;
    for u in open_unit_grid(grid).chain([GOLDEN_THRESHOLD]) {
        let lambda = lambda_unchecked(u);
        if u <= GOLDEN_THRESHOLD {
            max_dirac_value = max_dirac_value.max(objective(&DiscreteMeasure::dirac(u)?, lambda).value.abs());
        }
        if u >= GOLDEN_THRESHOLD {
            max_two_atom_value = max_two_atom_value.max(objective(&sharp_measure(u)?, lambda).value.abs());
        }
    }
    Ok(SharpnessReport {
        grid,
        max_dirac_value,
        max_two_atom_value,
        passed: max_dirac_value <= tol && max_two_atom_value <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // 40-digit reference values
    const H_0_2: f64 = 0.500_402_423_538_187_9;
    const H_0_36: f64 = 0.653_418_194_793_701_8;
    const F_MU_EXAMPLE: f64 = 0.687_572_333_375_050_5;

    #[test]
    fn measure_validation() {
        assert!(DiscreteMeasure::new([(0.5, 0.5)]).is_err());
        assert!(DiscreteMeasure::new([(1.5, 1.0)]).is_err());
        assert!(DiscreteMeasure::new([(0.5, -0.5), (0.2, 1.5)]).is_err());
        let mu = DiscreteMeasure::new([(0.6, 0.25), (0.2, 0.25), (0.6, 0.5), (0.9, 0.0)]).unwrap();
        assert_eq!(mu.len(), 2);
        assert_eq!(mu.atoms()[0].location, 0.2);
        assert_eq!(mu.atoms()[1].weight, 0.75);
    }

    #[test]
    fn mean_examples() {
        assert_eq!(DiscreteMeasure::dirac(0.3).unwrap().mean(), 0.3);
        assert_eq!(DiscreteMeasure::new([(0.0, 0.5), (1.0, 0.5)]).unwrap().mean(), 0.5);
        let mu = DiscreteMeasure::new([(0.2, 0.25), (0.6, 0.75)]).unwrap();
        assert_relative_eq!(mean(&mu), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn objective_examples() {
        let r = objective(&DiscreteMeasure::dirac(GOLDEN_THRESHOLD).unwrap(), 1.0);
        assert!(r.value.abs() < 1e-12);
        let r = objective(&DiscreteMeasure::new([(0.0, 0.3), (1.0, 0.7)]).unwrap(), 1.3);
        assert_eq!(r.value, 0.0);
        let r = objective(&DiscreteMeasure::dirac(0.2).unwrap(), lambda_unchecked(0.2));
        assert!(r.value.abs() < 1e-12);
        assert!((r.value - (r.quadratic - r.lambda * r.linear)).abs() < 1e-14);
    }

    #[test]
    fn linearized_examples() {
        let mu = DiscreteMeasure::new([(0.1, 0.4), (0.5, 0.6)]).unwrap();
        let obj = objective(&mu, 1.1);
        let lin = linearized_objective(&mu, &mu, 1.1);
        assert_relative_eq!(lin, obj.value + obj.quadratic, max_relative = 1e-14);
        assert_eq!(linearized_objective(&mu, &DiscreteMeasure::dirac(1.0).unwrap(), 1.1), 0.0);
    }

    #[test]
    fn stationarity_probe_at_sharp_measure() {
        // At the minimizer for u = 0.5, no feasible ν does better than ν = μ.
        let u = 0.5;
        let lambda = lambda_unchecked(u);
        let mu = sharp_measure(u).unwrap();
        let at_mu = linearized_objective(&mu, &mu, lambda);
        let mut best = f64::INFINITY;
        for i in 0..=200 {
            let v = i as f64 / 200.0;
            for j in 0..=200 {
                let x = j as f64 / 200.0;
                if x <= v {
                    continue;
                }
                // mean-u measures on {v, x} and single atoms below u
                let a = if x > u && v <= u { (x - u) / (x - v) } else { continue };
                let nu = DiscreteMeasure::new([(v, a), (x, 1.0 - a)]).unwrap();
                best = best.min(linearized_objective(&mu, &nu, lambda));
            }
            if v <= u {
                best = best.min(linearized_objective(&mu, &DiscreteMeasure::dirac(v).unwrap(), lambda));
            }
        }
        assert!(best >= at_mu - 1e-9, "best={best} at_mu={at_mu}");
    }

    #[test]
    fn two_atom_examples() {
        assert_eq!(two_atom_objective(0.3, 0.0, 1.2).unwrap(), 0.0);
        assert!(two_atom_objective(GOLDEN_THRESHOLD, 1.0, 1.0).unwrap().abs() < 1e-15);
        let expected = 0.25 * H_0_36 - 0.5 * H_0_2;
        assert_relative_eq!(two_atom_objective(0.2, 0.5, 1.0).unwrap(), expected, max_relative = 1e-14);
        assert_relative_eq!(expected, -0.086_846_663_070_668_49, max_relative = 1e-14);
        assert!(two_atom_objective(0.0, 0.5, 1.0).is_err());
        // agrees with the general objective
        let mu = DiscreteMeasure::two_atom(0.2, 0.5).unwrap();
        assert_relative_eq!(objective(&mu, 1.0).value, expected, max_relative = 1e-14);
    }

    #[test]
    fn scan_examples() {
        let s = two_atom_min_scan(0.3, 1000).unwrap();
        assert!(s.min_slack >= -1e-9);
        assert!((s.argmin_v - 0.3).abs() < 1e-12);
        let s = two_atom_min_scan(0.5, 1000).unwrap();
        assert!(s.min_slack.abs() < 1e-9);
        assert_eq!(s.argmin_v, GOLDEN_THRESHOLD);
        let s = two_atom_min_scan(GOLDEN_THRESHOLD, 1000).unwrap();
        assert!(s.min_slack.abs() < 1e-12);
        assert!((s.argmin_v - GOLDEN_THRESHOLD).abs() < 1e-12);
    }

    #[test]
    fn f_mu_examples() {
        let q = 0.4;
        let d0 = DiscreteMeasure::dirac(0.0).unwrap();
        assert_relative_eq!(f_mu(&d0, 1.3, q).unwrap(), 2.0 * h(q) - 1.3 * h(q), max_relative = 1e-14);
        let d1 = DiscreteMeasure::dirac(1.0).unwrap();
        assert_relative_eq!(f_mu(&d1, 1.3, q).unwrap(), -1.3 * h(q), max_relative = 1e-14);
        let d = DiscreteMeasure::dirac(0.3).unwrap();
        assert_relative_eq!(f_mu(&d, 1.0, q).unwrap(), F_MU_EXAMPLE, max_relative = 1e-14);
        assert!(f_mu(&d, 1.0, 1.0).is_err());
    }

    #[test]
    fn structure_examples() {
        let mu = DiscreteMeasure::dirac(GOLDEN_THRESHOLD).unwrap();
        let r = f_mu_structure_check(&mu, 1.0, 10_000).unwrap();
        assert!(r.strictly_decreasing);
        assert!(r.fd_max_rel_err < 1e-3, "{}", r.fd_max_rel_err);
        assert!(r.convexity_consistent);
        assert_eq!(r.shape, CurvatureShape::ConvexThenConcave);
        let a = r.inflection.unwrap();
        assert!(scaled_curvature(&mu, 1.0, a).abs() < 1e-9);
        let degenerate = DiscreteMeasure::new([(0.0, 0.5), (1.0, 0.5)]).unwrap();
        assert!(f_mu_structure_check(&degenerate, 1.0, 100).is_err());
    }

    #[test]
    fn local_search_examples() {
        let u = 0.3;
        let r = local_search_min(u, lambda_unchecked(u), 1000, 8, 7).unwrap();
        assert!(r.best_value >= -1e-6);
        assert!(r.best_mean <= u + 1e-12);

        let u = 0.5;
        let r = local_search_min(u, lambda_unchecked(u), 1000, 8, 7).unwrap();
        assert!(r.best_value.abs() < 1e-6, "{}", r.best_value);

        let u = 0.3;
        let r = local_search_min(u, 1.05 * lambda_unchecked(u), 1000, 8, 7).unwrap();
        assert!(r.best_value < 0.0);

        let again = local_search_min(u, 1.05 * lambda_unchecked(u), 1000, 8, 7).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn oracle_prefers_hull_edge_through_u() {
        let xs = [0.0, 0.25, 0.5, 1.0];
        // linear g: envelope minimum at x = 1, infeasible beyond u = 0.6
        let g = [0.0, -0.25, -0.5, -1.0];
        match linear_oracle(&xs, &g, 0.6) {
            Vertex::Pair(i, j, a) => {
                assert_eq!(xs[j], 1.0);
                assert!((a * xs[i] + (1.0 - a) * xs[j] - 0.6).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(linear_oracle(&xs, &[1.0, 0.0, 0.5, 2.0], 0.6), Vertex::Single(1));
    }
}

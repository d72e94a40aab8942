//! Correlated samples: the coupled-union probability, the worst coupling of
//! two copies of a measure (a transportation LP), the improved two-sample
//! inequality, a scan for its range of validity past the golden threshold,
//! and the greedy coupling of two uniform samples of a family as an exact
//! prefix dynamic program.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_prob, Error, Result};
use crate::families::{is_union_closed, Family};
use crate::measure::{local_search_min, DiscreteMeasure};
use crate::numeric::{compensated_sum, open_unit_grid};
use crate::scalar::{h, GOLDEN_THRESHOLD};
use crate::set_dist::{union_of_independent, ExplicitSetDistribution, SubsetMask};
use crate::transport::solve_transport;

/// Largest measure accepted by [`worst_coupling_value`].
pub const MAX_COUPLING_ATOMS: usize = 200;
/// Ground-set limit of [`greedy_coupling_dp`].
pub const MAX_DP_N: u32 = 10;
/// Family-size limit of [`greedy_coupling_dp`].
pub const MAX_DP_FAMILY: usize = 64;

const MARGINAL_TOL: f64 = 1e-12;

pub(crate) fn coupled_union(p: f64, r: f64) -> f64 {
    if p >= 0.5 || r >= 0.5 {
        p.max(r)
    } else {
        (p + r).min(0.5)
    }
}

/// Probability that `A_i ∪ C_i` holds under the greedy coupling with rates
/// `p` and `r`: `max(p, r)` if either is at least 1/2, else `min(p + r, 1/2)`.
pub fn coupled_union_prob(p: f64, r: f64) -> Result<f64> {
    let p = check_prob("p", p)?;
    let r = check_prob("r", r)?;
    Ok(coupled_union(p, r))
}

/// Joint law of `(p, r)` with prescribed marginals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointMeasure {
    rows: DiscreteMeasure,
    cols: DiscreteMeasure,
    /// Row-major; entry `(i, j)` is the mass at `(rows[i], cols[j])`.
    weights: Vec<f64>,
}

impl JointMeasure {
    pub fn new(rows: DiscreteMeasure, cols: DiscreteMeasure, weights: Vec<f64>) -> Result<Self> {
        let (m, n) = (rows.len(), cols.len());
        if weights.len() != m * n {
            return Err(Error::InvalidParams(format!("expected {} joint weights, got {}", m * n, weights.len())));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidParams("joint weights must be finite and nonnegative".into()));
        }
        for (i, a) in rows.atoms().iter().enumerate() {
            let s = compensated_sum((0..n).map(|j| weights[i * n + j]));
            if (s - a.weight).abs() > MARGINAL_TOL {
                return Err(Error::InvalidParams(format!("row {i} sums to {s}, expected {}", a.weight)));
            }
        }
        for (j, b) in cols.atoms().iter().enumerate() {
            let s = compensated_sum((0..m).map(|i| weights[i * n + j]));
            if (s - b.weight).abs() > MARGINAL_TOL {
                return Err(Error::InvalidParams(format!("column {j} sums to {s}, expected {}", b.weight)));
            }
        }
        Ok(Self { rows, cols, weights })
    }

    pub fn independent(rows: DiscreteMeasure, cols: DiscreteMeasure) -> Self {
        let weights = rows
            .atoms()
            .iter()
            .flat_map(|a| cols.atoms().iter().map(move |b| a.weight * b.weight))
            .collect();
        Self { rows, cols, weights }
    }

    pub fn rows(&self) -> &DiscreteMeasure {
        &self.rows
    }

    pub fn cols(&self) -> &DiscreteMeasure {
        &self.cols
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.cols.len() + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(p, r)]`.
    pub fn expectation<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        let n = self.cols.len();
        compensated_sum(self.rows.atoms().iter().enumerate().flat_map(|(i, a)| {
            let f = &f;
            self.cols
                .atoms()
                .iter()
                .enumerate()
                .map(move |(j, b)| self.weights[i * n + j] * f(a.location, b.location))
        }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstCoupling {
    /// `min_W E_W[H(coupled_union_prob(p, r))]` over couplings of μ with itself.
    pub value: f64,
    pub independent_value: f64,
    pub coupling: JointMeasure,
    pub pivots: usize,
}

/// Minimizes the expected coupled-union entropy over all couplings of `mu`
/// with itself.
pub fn worst_coupling_value(mu: &DiscreteMeasure) -> Result<WorstCoupling> {
    let k = mu.len();
    if k > MAX_COUPLING_ATOMS {
        return Err(Error::TooLarge { n: k as u64, limit: MAX_COUPLING_ATOMS as u64, context: "coupling LP" });
    }
    let xs: Vec<f64> = mu.atoms().iter().map(|a| a.location).collect();
    let ws: Vec<f64> = mu.atoms().iter().map(|a| a.weight).collect();
    let cost: Vec<f64> = xs.iter().flat_map(|&p| xs.iter().map(move |&r| h(coupled_union(p, r)))).collect();
    let sol = solve_transport(&ws, &ws, &cost)?;
    let independent = JointMeasure::independent(mu.clone(), mu.clone());
    let independent_value = independent.expectation(|p, r| h(coupled_union(p, r)));
    let coupling = JointMeasure { rows: mu.clone(), cols: mu.clone(), weights: sol.plan };
    let value = coupling.expectation(|p, r| h(coupled_union(p, r)));
    Ok(WorstCoupling { value, independent_value, coupling, pivots: sol.pivots })
}

/// `(1−α)·E[H(p+q−pq)] + α·min_W E[H(coupled)] − E[H(p)]`.
pub fn improved_slack(mu: &DiscreteMeasure, alpha: f64) -> Result<f64> {
    let alpha = check_prob("alpha", alpha)?;
    let worst = if alpha > 0.0 { worst_coupling_value(mu)?.value } else { 0.0 };
    Ok((1.0 - alpha) * mu.quadratic_term() + alpha * worst - mu.linear_term())
}

/// Parameters of [`delta_search`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSearchOptions {
    pub alpha: f64,
    /// Largest δ examined.
    pub delta_max: f64,
    /// Resolution of the δ grid `k·delta_max/delta_steps`.
    pub delta_steps: usize,
    /// Interior points of the location grid for the two-atom family.
    pub v_steps: usize,
    /// Interior points of the mean grid below the golden threshold.
    pub mean_steps: usize,
    /// Means `u* + δ_k` at which a local search is run, spread over the δ grid.
    pub local_points: usize,
    pub atom_grid: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for DeltaSearchOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            delta_max: 0.02,
            delta_steps: 1000,
            v_steps: 1000,
            mean_steps: 400,
            local_points: 8,
            atom_grid: 200,
            restarts: 4,
            seed: crate::DEFAULT_SEED,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureSource {
    TwoAtom,
    LocalSearch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScannedMeasure {
    pub source: MeasureSource,
    pub measure: DiscreteMeasure,
    pub mean: f64,
    pub slack: f64,
    /// Slack divided by `E[H(p)]`.
    pub normalized_slack: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaStatus {
    /// Some violator has mean above `u*`; δ is the last grid value below it.
    Certified,
    /// No violator with mean at most `u* + delta_max`.
    CapReached,
    /// A violator has mean at most `u*`.
    NoPositiveDelta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub options: DeltaSearchOptions,
    pub delta: f64,
    pub status: DeltaStatus,
    pub scanned: usize,
    /// Measures with `E[H(p)] = 0`, for which the inequality is not strict.
    pub excluded_degenerate: usize,
    pub violators: usize,
    /// Violator of smallest mean.
    pub binding: Option<ScannedMeasure>,
    /// Smallest normalized slack among scanned measures with mean at most `u* + δ`.
    pub worst_within: Option<ScannedMeasure>,
    /// `improved_slack(δ_{u*}, α)`.
    pub sharp_point_slack: f64,
}

/// Normalized slack at or below this counts as a violation.
pub const VIOLATION_TOL: f64 = 1e-12;

fn scan_measure(mu: DiscreteMeasure, alpha: f64, source: MeasureSource) -> Result<Option<ScannedMeasure>> {
    let linear = mu.linear_term();
    if linear <= 0.0 {
        return Ok(None);
    }
    let slack = improved_slack(&mu, alpha)?;
    Ok(Some(ScannedMeasure { source, mean: mu.mean(), measure: mu, slack, normalized_slack: slack / linear }))
}

/// Largest grid δ such that every scanned measure with mean at most `u* + δ`
/// satisfies the improved inequality strictly. The scanned class is the
/// family `w·δ_v + (1−w)·δ_1` on a (location, mean) grid together with the
/// local-search minimizers of the untouched functional at `λ = 1`; the result
/// holds for that class only.
pub fn delta_search(opts: &DeltaSearchOptions) -> Result<DeltaReport> {
    let alpha = check_prob("alpha", opts.alpha)?;
    if !(opts.delta_max > 0.0 && GOLDEN_THRESHOLD + opts.delta_max < 1.0) || opts.delta_steps == 0 {
        return Err(Error::InvalidParams("need 0 < delta_max < 1 − u* and delta_steps > 0".into()));
    }
    let u_star = GOLDEN_THRESHOLD;
    let deltas: Vec<f64> = (0..=opts.delta_steps)
        .map(|k| k as f64 * opts.delta_max / opts.delta_steps as f64)
        .collect();
    let cap = u_star + opts.delta_max;
    let means: Vec<f64> = open_unit_grid(opts.mean_steps)
        .map(|t| t * u_star)
        .chain(deltas.iter().map(|d| u_star + d))
        .collect();
    let mut vs: Vec<f64> = open_unit_grid(opts.v_steps).map(|t| t * cap).chain([u_star]).collect();
    vs.sort_by(f64::total_cmp);
    vs.dedup();

    let per_v: Vec<Result<Vec<Option<ScannedMeasure>>>> = vs
        .par_iter()
        .map(|&v| {
            means
                .iter()
                .filter(|&&m| m >= v)
                .map(|&m| {
                    let w = ((1.0 - m) / (1.0 - v)).min(1.0);
                    scan_measure(DiscreteMeasure::two_atom(v, w)?, alpha, MeasureSource::TwoAtom)
                })
                .collect()
        })
        .collect();
    let locals: Vec<Result<Option<ScannedMeasure>>> = (0..opts.local_points)
        .into_par_iter()
        .map(|k| {
            let d = deltas[((k + 1) * opts.delta_steps) / opts.local_points.max(1)];
            let report = local_search_min(u_star + d, 1.0, opts.atom_grid, opts.restarts, opts.seed.wrapping_add(k as u64))?;
            scan_measure(report.best_measure, alpha, MeasureSource::LocalSearch)
        })
        .collect();

    let mut scanned = 0;
    let mut excluded_degenerate = 0;
    let mut all: Vec<ScannedMeasure> = Vec::new();
    for item in per_v.into_iter().flat_map(|r| match r {
        Ok(v) => v.into_iter().map(Ok).collect::<Vec<_>>(),
        Err(e) => vec![Err(e)],
    }).chain(locals) {
        scanned += 1;
        match item? {
            Some(s) => all.push(s),
            None => excluded_degenerate += 1,
        }
    }

    let is_violator = |s: &ScannedMeasure| s.normalized_slack <= VIOLATION_TOL;
    let violators = all.iter().filter(|s| is_violator(s)).count();
    let binding = all
        .iter()
        .filter(|s| is_violator(s) && s.mean <= cap)
        .min_by(|a, b| a.mean.total_cmp(&b.mean).then(a.normalized_slack.total_cmp(&b.normalized_slack)))
        .cloned();
    let (delta, status) = match &binding {
        None => (opts.delta_max, DeltaStatus::CapReached),
        Some(b) => match deltas.iter().rev().find(|&&d| u_star + d < b.mean) {
            Some(&d) if d > 0.0 => (d, DeltaStatus::Certified),
            _ => (0.0, DeltaStatus::NoPositiveDelta),
        },
    };
    let worst_within = all
        .iter()
        .filter(|s| s.mean <= u_star + delta)
        .min_by(|a, b| a.normalized_slack.total_cmp(&b.normalized_slack))
        .cloned();
    let sharp_point_slack = improved_slack(&DiscreteMeasure::dirac(u_star)?, alpha)?;
    Ok(DeltaReport {
        options: opts.clone(),
        delta,
        status,
        scanned,
        excluded_degenerate,
        violators,
        binding,
        worst_within,
        sharp_point_slack,
    })
}

/// Which prefix each side's inclusion rate is read from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RateConvention {
    /// `A_i`'s rate conditions on `A_{<i}`, `C_i`'s on `C_{<i}`; both
    /// marginals are uniform on the family.
    #[default]
    OwnPrefix,
    /// `A_i`'s rate conditions on `C_{<i}` and vice versa. A prefix that no
    /// member of the family extends gets rate 0.
    Crossed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointEntry {
    pub a: SubsetMask,
    pub c: SubsetMask,
    pub prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyCouplingReport {
    pub n: u32,
    pub family_size: usize,
    pub convention: RateConvention,
    pub joint: Vec<JointEntry>,
    pub h_a: f64,
    pub h_c: f64,
    pub log_family_size: f64,
    pub h_union: f64,
    /// `H(A∪B)` for independent uniform samples.
    pub independent_h_union: f64,
    /// Largest `|Pr[A = S] − 1/|F||` over `S`, counting mass outside the family.
    pub deviation_a: f64,
    pub deviation_c: f64,
    pub marginals_uniform: bool,
}

struct PrefixRates {
    /// Per element `i`: prefix mask → (members with that prefix, those containing `i`).
    tables: Vec<HashMap<u32, (usize, usize)>>,
}

impl PrefixRates {
    fn new(f: &Family) -> Self {
        let tables = (0..f.n())
            .map(|i| {
                let mut t: HashMap<u32, (usize, usize)> = HashMap::new();
                for s in f.sets() {
                    let e = t.entry(s.prefix(i).0).or_default();
                    e.0 += 1;
                    e.1 += s.contains(i) as usize;
                }
                t
            })
            .collect();
        Self { tables }
    }

    fn rate(&self, i: u32, prefix: u32) -> f64 {
        match self.tables[i as usize].get(&prefix) {
            Some(&(total, with)) => with as f64 / total as f64,
            None => 0.0,
        }
    }
}

fn law_deviation(law: &BTreeMap<u32, f64>, f: &Family) -> f64 {
    let target = 1.0 / f.len() as f64;
    let inside = f.sets().iter().map(|s| (law.get(&s.0).copied().unwrap_or(0.0) - target).abs());
    let outside = law.iter().filter(|(m, _)| !f.contains(SubsetMask(**m))).map(|(_, p)| *p);
    inside.chain(outside).fold(0.0, f64::max)
}

fn law_entropy<'a, I: IntoIterator<Item = &'a f64>>(probs: I) -> f64 {
    compensated_sum(probs.into_iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()))
}

/// Runs the greedy coupling of two samples of the uniform distribution on a
/// union-closed family element by element and returns the exact joint law.
///
/// At step `i` with rates `p` for `A` and `r` for `C`, a common uniform `x`
/// sets `A_i = [x < p]`; `C_i = [x < r]` if either rate is at least 1/2,
/// otherwise `C_i = [1/2 − r < x ≤ 1/2]`.
pub fn greedy_coupling_dp(f: &Family, convention: RateConvention) -> Result<GreedyCouplingReport> {
    let n = f.n();
    if n > MAX_DP_N {
        return Err(Error::TooLarge { n: n as u64, limit: MAX_DP_N as u64, context: "coupling DP ground set" });
    }
    if f.len() > MAX_DP_FAMILY {
        return Err(Error::TooLarge { n: f.len() as u64, limit: MAX_DP_FAMILY as u64, context: "coupling DP family" });
    }
    if !is_union_closed(f) {
        return Err(Error::NotUnionClosed);
    }
    let rates = PrefixRates::new(f);
    let mut state: BTreeMap<(u32, u32), f64> = BTreeMap::from([((0, 0), 1.0)]);
    for i in 0..n {
        let bit = 1u32 << i;
        let mut next: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for (&(a, c), &mass) in &state {
            let (p, r) = match convention {
                RateConvention::OwnPrefix => (rates.rate(i, a), rates.rate(i, c)),
                RateConvention::Crossed => (rates.rate(i, c), rates.rate(i, a)),
            };
            let both = if p >= 0.5 || r >= 0.5 { p.min(r) } else { (p + r - 0.5).max(0.0) };
            let cells = [
                ((a | bit, c | bit), both),
                ((a | bit, c), p - both),
                ((a, c | bit), r - both),
                ((a, c), 1.0 - p - r + both),
            ];
            for (key, q) in cells {
                if q > 0.0 {
                    *next.entry(key).or_default() += mass * q;
                }
            }
        }
        state = next;
    }

    let mut law_a: BTreeMap<u32, f64> = BTreeMap::new();
    let mut law_c: BTreeMap<u32, f64> = BTreeMap::new();
    let mut law_union: BTreeMap<u32, f64> = BTreeMap::new();
    for (&(a, c), &p) in &state {
        *law_a.entry(a).or_default() += p;
        *law_c.entry(c).or_default() += p;
        *law_union.entry(a | c).or_default() += p;
    }
    let deviation_a = law_deviation(&law_a, f);
    let deviation_c = law_deviation(&law_c, f);
    let uniform = ExplicitSetDistribution::uniform_on(n, f.sets())?;
    let independent_h_union = union_of_independent(&uniform, &uniform)?.entropy();
    Ok(GreedyCouplingReport {
        n,
        family_size: f.len(),
        convention,
        joint: state.iter().map(|(&(a, c), &prob)| JointEntry { a: SubsetMask(a), c: SubsetMask(c), prob }).collect(),
        h_a: law_entropy(law_a.values()),
        h_c: law_entropy(law_c.values()),
        log_family_size: (f.len() as f64).ln(),
        h_union: law_entropy(law_union.values()),
        independent_h_union,
        deviation_a,
        deviation_c,
        marginals_uniform: deviation_a <= MARGINAL_TOL && deviation_c <= MARGINAL_TOL,
    })
}

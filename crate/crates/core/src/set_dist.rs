//! Distributions over subsets of a finite ground set.
//!
//! Elements are indexed from 0; element `i` is bit `i` of a [`SubsetMask`].
//! The prefix `A_{<i}` of a set is its mask restricted to bits `0..i`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_prob, Error, Result};
use crate::numeric::compensated_sum;
use crate::scalar::{h, h_union, lambda_unchecked, GOLDEN_THRESHOLD, PHI};

/// Largest ground set for which a dense probability table is built.
pub const MAX_EXPLICIT_N: u32 = 24;

/// Probabilities at or below this are exact zeros in entropy and KL sums.
pub const ZERO_PROB: f64 = 1e-300;

const NORMALIZATION_TOL: f64 = 1e-12;

/// A subset of the ground set, bit `i` set iff element `i` belongs to it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsetMask(pub u32);

impl SubsetMask {
    pub const EMPTY: SubsetMask = SubsetMask(0);

    /// The full ground set `{0, …, n−1}`.
    pub fn full(n: u32) -> Self {
        SubsetMask(low_mask(n))
    }

    pub fn from_elements<I: IntoIterator<Item = u32>>(elements: I) -> Self {
        SubsetMask(elements.into_iter().fold(0, |m, i| m | (1 << i)))
    }

    pub fn contains(self, i: u32) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn union(self, other: SubsetMask) -> SubsetMask {
        SubsetMask(self.0 | other.0)
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Restriction to the elements `0..i`.
    pub fn prefix(self, i: u32) -> SubsetMask {
        SubsetMask(self.0 & low_mask(i))
    }

    pub fn fits(self, n: u32) -> bool {
        n >= 32 || self.0 >> n == 0
    }

    pub fn elements(self) -> impl Iterator<Item = u32> {
        (0..32).filter(move |&i| self.contains(i))
    }
}

#[inline]
pub(crate) fn low_mask(i: u32) -> u32 {
    if i >= 32 {
        u32::MAX
    } else {
        (1u32 << i) - 1
    }
}

fn check_explicit_n(n: u32, context: &'static str) -> Result<()> {
    if n > MAX_EXPLICIT_N {
        Err(Error::TooLarge {
            n: n as u64,
            limit: MAX_EXPLICIT_N as u64,
            context,
        })
    } else {
        Ok(())
    }
}

/// Full probability table over the `2ⁿ` subsets of an `n`-element ground set.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitSetDistribution {
    n: u32,
    probs: Vec<f64>,
}

/// Expected conditional entropies `H(A_{<i+1} | A_{<i})`, one per element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainProfile {
    pub entries: Vec<f64>,
}

impl ChainProfile {
    pub fn total(&self) -> f64 {
        compensated_sum(self.entries.iter().copied())
    }
}

/// Conditional entropies of one step of the induction over elements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InductionStep {
    pub element: u32,
    pub marginal: f64,
    /// H(A_{<i+1} | A_{<i}) = E[H(p_i)].
    pub single: f64,
    /// H((A∪B)_{<i+1} | (A∪B)_{<i}).
    pub union_own_prefix: f64,
    /// H((A∪B)_{<i+1} | A_{<i}, B_{<i}) = E[H(p_i + q_i − p_i q_i)].
    pub union_joint_prefix: f64,
}

impl ExplicitSetDistribution {
    /// Builds a distribution from a dense table indexed by mask.
    pub fn new(n: u32, probs: Vec<f64>) -> Result<Self> {
        check_explicit_n(n, "explicit set distribution")?;
        if probs.len() != 1usize << n {
            return Err(Error::InvalidParams(format!(
                "table has {} entries, expected 2^{n}",
                probs.len()
            )));
        }
        if let Some(&bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::Domain {
                what: "probability",
                value: bad,
                domain: "[0, inf)",
            });
        }
        let total = compensated_sum(probs.iter().copied());
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Normalization(total));
        }
        Ok(Self { n, probs })
    }

    /// Builds a distribution from `(mask, probability)` pairs; repeated masks
    /// accumulate.
    pub fn from_pairs<I: IntoIterator<Item = (SubsetMask, f64)>>(n: u32, pairs: I) -> Result<Self> {
        check_explicit_n(n, "explicit set distribution")?;
        let mut probs = vec![0.0; 1usize << n];
        for (mask, p) in pairs {
            if !mask.fits(n) {
                return Err(Error::MaskOutOfRange { mask: mask.0 as u64, n });
            }
            probs[mask.0 as usize] += p;
        }
        Self::new(n, probs)
    }

    /// Uniform law on a list of distinct masks.
    pub fn uniform_on(n: u32, masks: &[SubsetMask]) -> Result<Self> {
        if masks.is_empty() {
            return Err(Error::EmptyFamily);
        }
        let p = 1.0 / masks.len() as f64;
        Self::from_pairs(n, masks.iter().map(|&m| (m, p)))
    }

    pub fn point_mass(n: u32, mask: SubsetMask) -> Result<Self> {
        Self::from_pairs(n, [(mask, 1.0)])
    }

    /// Each element included independently with probability `u`.
    pub fn product(n: u32, u: f64) -> Result<Self> {
        check_explicit_n(n, "product distribution")?;
        let u = check_prob("u", u)?;
        let by_size: Vec<f64> = (0..=n as i32)
            .map(|c| u.powi(c) * (1.0 - u).powi(n as i32 - c))
            .collect();
        let probs = (0..1u32 << n)
            .map(|m| by_size[m.count_ones() as usize])
            .collect();
        Self::new(n, probs)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, mask: SubsetMask) -> f64 {
        self.probs.get(mask.0 as usize).copied().unwrap_or(0.0)
    }

    /// Masks with positive probability, in increasing order.
    pub fn support(&self) -> impl Iterator<Item = (SubsetMask, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(m, &p)| (SubsetMask(m as u32), p))
    }

    /// Shannon entropy `−Σ P(S) ln P(S)`.
    pub fn entropy(&self) -> f64 {
        compensated_sum(
            self.probs
                .iter()
                .filter(|&&p| p > ZERO_PROB)
                .map(|&p| -p * p.ln()),
        )
    }

    fn check_index(&self, i: u32) -> Result<()> {
        if i >= self.n {
            Err(Error::IndexOutOfRange { index: i, n: self.n })
        } else {
            Ok(())
        }
    }

    /// `Pr[i ∈ A]`.
    pub fn marginal(&self, i: u32) -> Result<f64> {
        self.check_index(i)?;
        let bit = 1usize << i;
        Ok(compensated_sum(
            self.probs
                .iter()
                .enumerate()
                .filter(|(m, _)| m & bit != 0)
                .map(|(_, &p)| p),
        ))
    }

    pub fn marginals(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.marginal(i).expect("index in range")).collect()
    }

    pub fn max_marginal(&self) -> f64 {
        self.marginals().into_iter().fold(0.0, f64::max)
    }

    /// `Pr[i ∈ A | A_{<i} = prefix]`.
    pub fn conditional_prob(&self, i: u32, prefix: SubsetMask) -> Result<f64> {
        self.check_index(i)?;
        if !prefix.fits(i) {
            return Err(Error::MaskOutOfRange { mask: prefix.0 as u64, n: i });
        }
        let low = low_mask(i) as usize;
        let bit = 1usize << i;
        let (mut both, mut total) = (0.0, 0.0);
        for (m, &p) in self.probs.iter().enumerate() {
            if m & low == prefix.0 as usize {
                total += p;
                if m & bit != 0 {
                    both += p;
                }
            }
        }
        if total <= ZERO_PROB {
            return Err(Error::ZeroProbabilityPrefix);
        }
        Ok((both / total).min(1.0))
    }

    /// Laws of the prefixes: entry `k` is the distribution of `A_{<k}`
    /// (length `2^k`), for `k = 0..=n`.
    fn prefix_tables(&self) -> Vec<Vec<f64>> {
        let n = self.n as usize;
        let mut tables = vec![Vec::new(); n + 1];
        tables[n] = self.probs.clone();
        for k in (0..n).rev() {
            let upper = &tables[k + 1];
            let half = 1usize << k;
            tables[k] = (0..half).map(|m| upper[m] + upper[m | half]).collect();
        }
        tables
    }

    /// Chain-rule decomposition in the natural element order.
    pub fn chain_profile(&self) -> ChainProfile {
        let tables = self.prefix_tables();
        let entries = (0..self.n as usize)
            .map(|i| {
                let (lower, upper) = (&tables[i], &tables[i + 1]);
                let bit = 1usize << i;
                compensated_sum(lower.iter().enumerate().filter(|(_, &w)| w > ZERO_PROB).map(
                    |(m, &w)| {
                        let p = (upper[m | bit] / w).min(1.0);
                        w * h(p)
                    },
                ))
            })
            .collect();
        ChainProfile { entries }
    }

    /// Chain-rule decomposition revealing elements in `order`
    /// (`order[k]` is the element revealed at step `k`).
    pub fn chain_profile_with_order(&self, order: &[u32]) -> Result<ChainProfile> {
        Ok(self.permuted(order)?.chain_profile())
    }

    /// Relabels elements so that element `order[k]` becomes element `k`.
    pub fn permuted(&self, order: &[u32]) -> Result<Self> {
        let n = self.n;
        let mut seen = vec![false; n as usize];
        if order.len() != n as usize {
            return Err(Error::InvalidParams("order must be a permutation of 0..n".into()));
        }
        for &e in order {
            if e >= n || std::mem::replace(&mut seen[e as usize], true) {
                return Err(Error::InvalidParams("order must be a permutation of 0..n".into()));
            }
        }
        let mut probs = vec![0.0; self.probs.len()];
        for (m, &p) in self.probs.iter().enumerate() {
            let target = order
                .iter()
                .enumerate()
                .filter(|(_, &e)| m >> e & 1 == 1)
                .fold(0usize, |acc, (k, _)| acc | 1 << k);
            probs[target] = p;
        }
        Ok(Self { n, probs })
    }

    /// Law of `A ∪ B` for independent `A ~ self`, `B ~ other`.
    pub fn union_with(&self, other: &Self) -> Result<Self> {
        union_of_independent(self, other)
    }

    /// Per-element conditional entropies for independent copies `A`, `B`.
    pub fn induction_profile(&self) -> Result<Vec<InductionStep>> {
        let union = self.union_with(self)?;
        let own = union.chain_profile();
        let tables = self.prefix_tables();
        let mut steps = Vec::with_capacity(self.n as usize);
        for i in 0..self.n as usize {
            let (lower, upper) = (&tables[i], &tables[i + 1]);
            let bit = 1usize << i;
            // (weight of prefix, conditional inclusion probability)
            let rates: Vec<(f64, f64)> = lower
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > ZERO_PROB)
                .map(|(m, &w)| (w, (upper[m | bit] / w).min(1.0)))
                .collect();
            let single = compensated_sum(rates.iter().map(|&(w, p)| w * h(p)));
            let joint = compensated_sum(rates.iter().flat_map(|&(wa, pa)| {
                rates.iter().map(move |&(wb, pb)| wa * wb * h_union(pa, pb))
            }));
            steps.push(InductionStep {
                element: i as u32,
                marginal: compensated_sum(rates.iter().map(|&(w, p)| w * p)),
                single,
                union_own_prefix: own.entries[i],
                union_joint_prefix: joint,
            });
        }
        Ok(steps)
    }

    /// Parses the `n=<int>` / `mask_hex probability` text format.
    pub fn parse(text: &str) -> Result<Self> {
        let (n, body) = parse_header(text)?;
        let n32 = u32::try_from(n).map_err(|_| Error::Parse { line: 1, msg: "n too large".into() })?;
        check_explicit_n(n32, "explicit set distribution")?;
        let mut pairs = Vec::new();
        for (line_no, line) in body {
            let mut fields = line.split_whitespace();
            let (Some(mask), Some(prob), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::Parse { line: line_no, msg: "expected `mask_hex probability`".into() });
            };
            let mask = parse_hex_mask(mask, line_no)?;
            let prob: f64 = prob
                .parse()
                .map_err(|e| Error::Parse { line: line_no, msg: format!("bad probability: {e}") })?;
            pairs.push((mask, prob));
        }
        Self::from_pairs(n32, pairs)
    }

    /// Text form: header `n=<int>`, then `mask_hex probability` for every
    /// mask with positive probability.
    pub fn to_text(&self) -> String {
        let mut out = format!("n={}\n", self.n);
        for (mask, p) in self.support() {
            let _ = writeln!(out, "{:x} {:e}", mask.0, p);
        }
        out
    }
}

pub(crate) fn parse_header(text: &str) -> Result<(u64, Vec<(usize, &str)>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (line_no, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing `n=<int>` header".into() })?;
    let n = header
        .strip_prefix("n=")
        .and_then(|v| v.trim().parse::<u64>().ok())
        .ok_or_else(|| Error::Parse { line: line_no, msg: format!("expected `n=<int>`, got `{header}`") })?;
    Ok((n, lines.collect()))
}

pub(crate) fn parse_hex_mask(field: &str, line: usize) -> Result<SubsetMask> {
    let digits = field.trim_start_matches("0x").trim_start_matches("0X");
    u32::from_str_radix(digits, 16)
        .map(SubsetMask)
        .map_err(|e| Error::Parse { line, msg: format!("bad hex mask `{field}`: {e}") })
}

/// Shannon entropy of an explicit distribution.
pub fn entropy_explicit(d: &ExplicitSetDistribution) -> f64 {
    d.entropy()
}

/// Law of `A ∪ B` for independent `A ~ d1`, `B ~ d2`.
///
/// Small supports are convolved pairwise, which is exact up to rounding of
/// nonnegative sums. Large ones go through the subset-sum transform:
/// `Pr[A∪B ⊆ S] = Pr[A ⊆ S]·Pr[B ⊆ S]`, then Möbius inversion.
pub fn union_of_independent(
    d1: &ExplicitSetDistribution,
    d2: &ExplicitSetDistribution,
) -> Result<ExplicitSetDistribution> {
    if d1.n != d2.n {
        return Err(Error::SizeMismatch(d1.n, d2.n));
    }
    let s1: Vec<(SubsetMask, f64)> = d1.support().collect();
    let s2: Vec<(SubsetMask, f64)> = d2.support().collect();
    let size = 1usize << d1.n;
    let mut probs = if (s1.len() as u64) * (s2.len() as u64) <= 1 << 26 {
        // per-cell Neumaier accumulation; the full set collects most pairs
        let mut out = vec![0.0; size];
        let mut comp = vec![0.0; size];
        for &(a, pa) in &s1 {
            for &(b, pb) in &s2 {
                let cell = (a.0 | b.0) as usize;
                let v = pa * pb;
                let t = out[cell] + v;
                comp[cell] += if out[cell].abs() >= v { (out[cell] - t) + v } else { (v - t) + out[cell] };
                out[cell] = t;
            }
        }
        out.iter_mut().zip(&comp).for_each(|(o, c)| *o += c);
        out
    } else {
        let mut f1 = d1.probs.clone();
        let mut f2 = d2.probs.clone();
        zeta_subsets(&mut f1);
        zeta_subsets(&mut f2);
        let mut g: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| a * b).collect();
        moebius_subsets(&mut g);
        for v in g.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        g
    };
    // inputs are normalized only to 1e-12; keep the output on the same footing
    let total = compensated_sum(probs.iter().copied());
    probs.iter_mut().for_each(|v| *v /= total);
    ExplicitSetDistribution::new(d1.n, probs)
}

fn zeta_subsets(f: &mut [f64]) {
    let size = f.len();
    let mut bit = 1;
    while bit < size {
        for m in 0..size {
            if m & bit != 0 {
                f[m] += f[m ^ bit];
            }
        }
        bit <<= 1;
    }
}

fn moebius_subsets(f: &mut [f64]) {
    let size = f.len();
    let mut bit = 1;
    while bit < size {
        for m in 0..size {
            if m & bit != 0 {
                f[m] -= f[m ^ bit];
            }
        }
        bit <<= 1;
    }
}

/// `D(P || Q) = Σ P(S) ln(P(S)/Q(S))`, `+∞` when P is not absolutely
/// continuous with respect to Q.
pub fn kl_divergence(p: &ExplicitSetDistribution, q: &ExplicitSetDistribution) -> Result<f64> {
    if p.n != q.n {
        return Err(Error::SizeMismatch(p.n, q.n));
    }
    let mut terms = Vec::new();
    for (&a, &b) in p.probs.iter().zip(&q.probs) {
        if a <= ZERO_PROB {
            continue;
        }
        if b <= ZERO_PROB {
            return Ok(f64::INFINITY);
        }
        terms.push(a * (a / b).ln());
    }
    Ok(compensated_sum(terms).max(0.0))
}

/// One product component of a [`ProductMixture`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub inclusion: f64,
}

/// Weighted mixture of product distributions on an `n`-element ground set.
/// `n` may be far beyond [`MAX_EXPLICIT_N`]; only bound arithmetic is
/// available there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductMixture {
    n: u64,
    components: Vec<MixtureComponent>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyBounds {
    pub lower: f64,
    pub upper: f64,
}

impl ProductMixture {
    pub fn new(n: u64, components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidParams("mixture needs at least one component".into()));
        }
        for c in &components {
            check_prob("inclusion", c.inclusion)?;
            if !c.weight.is_finite() || c.weight < 0.0 {
                return Err(Error::Domain { what: "weight", value: c.weight, domain: "[0, inf)" });
            }
        }
        let total = compensated_sum(components.iter().map(|c| c.weight));
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Normalization(total));
        }
        Ok(Self { n, components })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    /// `Pr[i ∈ A]`, identical for every element.
    pub fn marginal(&self) -> f64 {
        compensated_sum(self.components.iter().map(|c| c.weight * c.inclusion))
    }

    /// Entropy of the mixing law over components.
    pub fn mixing_entropy(&self) -> f64 {
        compensated_sum(
            self.components
                .iter()
                .filter(|c| c.weight > ZERO_PROB)
                .map(|c| -c.weight * c.weight.ln()),
        )
    }

    /// `lower = Σ_k w_k·n·H(x_k)`, `upper = lower + H(w)`.
    pub fn entropy_bounds(&self) -> EntropyBounds {
        let n = self.n as f64;
        let lower = compensated_sum(self.components.iter().map(|c| c.weight * n * h(c.inclusion)));
        EntropyBounds {
            lower,
            upper: lower + self.mixing_entropy(),
        }
    }

    /// Mixture describing `A ∪ B` for independent copies: one component per
    /// ordered pair of components.
    pub fn union_mixture(&self) -> ProductMixture {
        let components = self
            .components
            .iter()
            .flat_map(|a| {
                self.components.iter().map(move |b| MixtureComponent {
                    weight: a.weight * b.weight,
                    inclusion: a.inclusion + b.inclusion - a.inclusion * b.inclusion,
                })
            })
            .collect();
        ProductMixture { n: self.n, components }
    }

    /// Dense table of the mixture (requires `n ≤ 24`).
    pub fn expand(&self) -> Result<ExplicitSetDistribution> {
        let n = u32::try_from(self.n).unwrap_or(u32::MAX);
        check_explicit_n(n, "mixture expansion")?;
        let by_size: Vec<f64> = (0..=n as i32)
            .map(|c| {
                compensated_sum(self.components.iter().map(|comp| {
                    comp.weight * comp.inclusion.powi(c) * (1.0 - comp.inclusion).powi(n as i32 - c)
                }))
            })
            .collect();
        let probs = (0..1u32 << n).map(|m| by_size[m.count_ones() as usize]).collect();
        ExplicitSetDistribution::new(n, probs)
    }

    /// Parses header `n=<int>` followed by `weight inclusion` lines.
    pub fn parse(text: &str) -> Result<Self> {
        let (n, body) = parse_header(text)?;
        let mut components = Vec::new();
        for (line_no, line) in body {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [w, x] = fields[..] else {
                return Err(Error::Parse { line: line_no, msg: "expected `weight inclusion`".into() });
            };
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse { line: line_no, msg: format!("bad number `{s}`: {e}") })
            };
            components.push(MixtureComponent { weight: parse(w)?, inclusion: parse(x)? });
        }
        Self::new(n, components)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("n={}\n", self.n);
        for c in &self.components {
            let _ = writeln!(out, "{:e} {:e}", c.weight, c.inclusion);
        }
        out
    }
}

/// Product Bernoulli(u) law: the sharp example for `u ≤ (3 − √5)/2`.
pub fn example1_distribution(u: f64, n: u32) -> Result<ExplicitSetDistribution> {
    ExplicitSetDistribution::product(n, u)
}

/// Sharp example for `u ≥ (3 − √5)/2`: with probability `w = (1 − u)·φ`
/// a product Bernoulli((3 − √5)/2) set, otherwise the full ground set.
pub fn example2_distribution(u: f64, n: u64) -> Result<ProductMixture> {
    let u = check_prob("u", u)?;
    if u < GOLDEN_THRESHOLD {
        return Err(Error::Domain { what: "u", value: u, domain: "[(3-sqrt5)/2, 1]" });
    }
    let w = ((1.0 - u) * PHI).min(1.0);
    let components = [
        MixtureComponent { weight: w, inclusion: GOLDEN_THRESHOLD },
        MixtureComponent { weight: 1.0 - w, inclusion: 1.0 },
    ]
    .into_iter()
    .filter(|c| c.weight > 0.0)
    .collect();
    ProductMixture::new(n, components)
}

/// Outcome of checking `H(A∪B) ≥ λ(u)·H(A)` with `u` the largest marginal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Report {
    pub n: u32,
    pub u: f64,
    pub lambda: f64,
    pub h_a: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub equality: bool,
}

pub const THEOREM2_TOL: f64 = 1e-10;

pub fn verify_theorem2(d: &ExplicitSetDistribution) -> Result<Theorem2Report> {
    let u = d.max_marginal();
    if u <= ZERO_PROB || u >= 1.0 {
        return Err(Error::Degenerate("largest marginal must lie strictly inside (0, 1)"));
    }
    let lambda = lambda_unchecked(u);
    let h_a = d.entropy();
    let lhs = d.union_with(d)?.entropy();
    let rhs = lambda * h_a;
    let slack = lhs - rhs;
    Ok(Theorem2Report {
        n: d.n,
        u,
        lambda,
        h_a,
        lhs,
        rhs,
        slack,
        equality: slack.abs() <= THEOREM2_TOL,
    })
}

/// A random distribution on subsets of `[n]`: each mask enters the support
/// with a random density, weights are i.i.d. exponential, then normalized.
pub fn random_distribution<R: Rng + ?Sized>(n: u32, rng: &mut R) -> Result<ExplicitSetDistribution> {
    if n > MAX_EXPLICIT_N {
        return Err(Error::TooLarge { n: n as u64, limit: MAX_EXPLICIT_N as u64, context: "random distribution" });
    }
    let size = 1usize << n;
    let density: f64 = rng.gen_range(0.05..=1.0);
    let mut probs: Vec<f64> = (0..size)
        .map(|_| if rng.gen_bool(density) { -rng.gen::<f64>().max(1e-300).ln() } else { 0.0 })
        .collect();
    if probs.iter().all(|&p| p == 0.0) {
        probs[rng.gen_range(0..size)] = 1.0;
    }
    let total = compensated_sum(probs.iter().copied());
    probs.iter_mut().for_each(|p| *p /= total);
    ExplicitSetDistribution::new(n, probs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Battery {
    pub count: usize,
    pub max_n: u32,
    pub seed: u64,
    pub tol: f64,
    /// Draws discarded because the largest marginal was 0 or 1.
    pub resampled: usize,
    pub min_slack: f64,
    pub worst: Option<Theorem2Report>,
    /// Product distributions `Bernoulli(u)^n`, `u ≤ u*`, checked for equality.
    pub equality_cases: usize,
    pub max_equality_gap: f64,
    pub passed: bool,
}

/// Checks the inequality on `count` seeded random distributions with
/// `1 ≤ n ≤ max_n`, and equality on product distributions for a grid of
/// `u ≤ u*` and `n ∈ {1, …, max_n}`.
pub fn theorem2_battery(count: usize, max_n: u32, seed: u64, tol: f64) -> Result<Theorem2Battery> {
    if max_n == 0 || max_n > 12 {
        return Err(Error::InvalidParams(format!("max_n must be in 1..=12, got {max_n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut resampled = 0;
    let mut min_slack = f64::INFINITY;
    let mut worst = None;
    for _ in 0..count {
        let report = loop {
            let n = rng.gen_range(1..=max_n);
            match verify_theorem2(&random_distribution(n, &mut rng)?) {
                Ok(r) => break r,
                Err(Error::Degenerate(_)) => resampled += 1,
                Err(e) => return Err(e),
            }
        };
        if report.slack < min_slack {
            min_slack = report.slack;
            worst = Some(report);
        }
    }
    let mut equality_cases = 0;
    let mut max_equality_gap = 0.0f64;
    for k in 1..=20 {
        let u = GOLDEN_THRESHOLD * k as f64 / 20.0;
        for n in 1..=max_n {
            let r = verify_theorem2(&example1_distribution(u, n)?)?;
            equality_cases += 1;
            max_equality_gap = max_equality_gap.max(r.slack.abs());
        }
    }
    Ok(Theorem2Battery {
        count,
        max_n,
        seed,
        tol,
        resampled,
        min_slack,
        worst,
        equality_cases,
        max_equality_gap,
        passed: min_slack >= -tol && max_equality_gap <= tol,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticPoint {
    pub n: u32,
    pub h_a: f64,
    pub h_union: f64,
    pub ratio: f64,
    /// `n·|ratio − λ(u)|`.
    pub scaled_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example2Asymptotics {
    pub u: f64,
    pub lambda: f64,
    pub points: Vec<AsymptoticPoint>,
    /// Smallest `C` with `|ratio − λ(u)| ≤ C/n` at every point.
    pub fitted_constant: f64,
}

/// Exact `H(A∪B)/H(A)` for the second sharp example at each `n`.
pub fn example2_asymptotics(u: f64, ns: &[u32]) -> Result<Example2Asymptotics> {
    let lambda = lambda_unchecked(check_prob("u", u)?);
    let points = ns
        .iter()
        .map(|&n| {
            let a = example2_distribution(u, n as u64)?.expand()?;
            let (h_a, h_union) = (a.entropy(), a.union_with(&a)?.entropy());
            let ratio = h_union / h_a;
            Ok(AsymptoticPoint { n, h_a, h_union, ratio, scaled_gap: n as f64 * (ratio - lambda).abs() })
        })
        .collect::<Result<Vec<_>>>()?;
    let fitted_constant = points.iter().map(|p| p.scaled_gap).fold(0.0, f64::max);
    Ok(Example2Asymptotics { u, lambda, points, fitted_constant })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const H_0_25: f64 = 0.562_335_144_618_808_4;
    const H_2_3: f64 = 0.636_514_168_294_812_8;

    fn m(elements: &[u32]) -> SubsetMask {
        SubsetMask::from_elements(elements.iter().copied())
    }

    fn chain3() -> ExplicitSetDistribution {
        // uniform on {∅, {1}, {1,2}} with elements renumbered from 0
        ExplicitSetDistribution::uniform_on(2, &[m(&[]), m(&[0]), m(&[0, 1])]).unwrap()
    }

    #[test]
    fn entropy_examples() {
        let u4 = ExplicitSetDistribution::uniform_on(2, &[m(&[]), m(&[0]), m(&[1]), m(&[0, 1])]).unwrap();
        assert_relative_eq!(u4.entropy(), 4f64.ln(), max_relative = 1e-15);
        assert_eq!(ExplicitSetDistribution::point_mass(3, m(&[1])).unwrap().entropy(), 0.0);
        let d = ExplicitSetDistribution::from_pairs(1, [(m(&[]), 0.25), (m(&[0]), 0.75)]).unwrap();
        assert_relative_eq!(d.entropy(), H_0_25, max_relative = 1e-15);
    }

    #[test]
    fn rejects_unnormalized_tables() {
        assert!(matches!(
            ExplicitSetDistribution::new(1, vec![0.5, 0.6]),
            Err(Error::Normalization(_))
        ));
        assert!(ExplicitSetDistribution::new(1, vec![1.5, -0.5]).is_err());
        assert!(ExplicitSetDistribution::new(2, vec![1.0, 0.0]).is_err());
        assert!(ExplicitSetDistribution::from_pairs(1, [(m(&[3]), 1.0)]).is_err());
        assert!(ExplicitSetDistribution::product(25, 0.5).is_err());
    }

    #[test]
    fn marginal_examples() {
        let d = ExplicitSetDistribution::product(4, 0.3).unwrap();
        for i in 0..4 {
            assert_relative_eq!(d.marginal(i).unwrap(), 0.3, max_relative = 1e-14);
        }
        let u4 = ExplicitSetDistribution::uniform_on(2, &[m(&[]), m(&[0]), m(&[1]), m(&[0, 1])]).unwrap();
        assert_relative_eq!(u4.marginal(0).unwrap(), 0.5);
        assert_relative_eq!(chain3().marginal(0).unwrap(), 2.0 / 3.0, max_relative = 1e-15);
        assert!(matches!(chain3().marginal(2), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn union_examples() {
        let d = chain3();
        let empty = ExplicitSetDistribution::point_mass(2, SubsetMask::EMPTY).unwrap();
        assert_eq!(union_of_independent(&d, &empty).unwrap(), d);

        let half = ExplicitSetDistribution::uniform_on(1, &[m(&[]), m(&[0])]).unwrap();
        let u = half.union_with(&half).unwrap();
        assert_relative_eq!(u.prob(m(&[])), 0.25);
        assert_relative_eq!(u.prob(m(&[0])), 0.75);

        let p = ExplicitSetDistribution::product(5, 0.3).unwrap();
        let pu = p.union_with(&p).unwrap();
        let expected = ExplicitSetDistribution::product(5, 0.51).unwrap();
        for (a, b) in pu.probs().iter().zip(expected.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
        let other = ExplicitSetDistribution::product(4, 0.3).unwrap();
        assert!(matches!(p.union_with(&other), Err(Error::SizeMismatch(5, 4))));
    }

    #[test]
    fn transform_route_matches_pairwise_route() {
        let p = ExplicitSetDistribution::product(6, 0.35).unwrap();
        let direct = p.union_with(&p).unwrap();
        let mut f = p.probs().to_vec();
        zeta_subsets(&mut f);
        let mut g: Vec<f64> = f.iter().map(|x| x * x).collect();
        moebius_subsets(&mut g);
        for (a, b) in direct.probs().iter().zip(&g) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn kl_examples() {
        let d = chain3();
        assert_eq!(kl_divergence(&d, &d).unwrap(), 0.0);
        let p = ExplicitSetDistribution::point_mass(1, m(&[0])).unwrap();
        let q = ExplicitSetDistribution::uniform_on(1, &[m(&[]), m(&[0])]).unwrap();
        assert_relative_eq!(kl_divergence(&p, &q).unwrap(), std::f64::consts::LN_2, max_relative = 1e-15);
        let r = ExplicitSetDistribution::point_mass(1, m(&[])).unwrap();
        assert_eq!(kl_divergence(&p, &r).unwrap(), f64::INFINITY);
    }

    #[test]
    fn conditional_examples() {
        let d = chain3();
        assert_relative_eq!(d.conditional_prob(1, m(&[0])).unwrap(), 0.5);
        assert_eq!(d.conditional_prob(1, m(&[])).unwrap(), 0.0);
        let p = ExplicitSetDistribution::product(4, 0.3).unwrap();
        for prefix in 0..8 {
            assert_relative_eq!(p.conditional_prob(3, SubsetMask(prefix)).unwrap(), 0.3, max_relative = 1e-14);
        }
        let pm = ExplicitSetDistribution::point_mass(2, m(&[0])).unwrap();
        assert_eq!(pm.conditional_prob(1, m(&[])), Err(Error::ZeroProbabilityPrefix));
        assert!(d.conditional_prob(1, m(&[1])).is_err());
    }

    #[test]
    fn chain_examples() {
        let c = chain3().chain_profile();
        assert_relative_eq!(c.entries[0], H_2_3, max_relative = 1e-15);
        assert_relative_eq!(c.entries[1], 2.0 / 3.0 * std::f64::consts::LN_2, max_relative = 1e-15);
        assert_relative_eq!(c.total(), 3f64.ln(), max_relative = 1e-15);

        let p = ExplicitSetDistribution::product(5, 0.3).unwrap().chain_profile();
        for e in &p.entries {
            assert_relative_eq!(*e, h(0.3), max_relative = 1e-13);
        }
        let pm = ExplicitSetDistribution::point_mass(3, m(&[0, 2])).unwrap().chain_profile();
        assert!(pm.entries.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn chain_order_permutation() {
        let d = chain3();
        let rev = d.chain_profile_with_order(&[1, 0]).unwrap();
        assert_relative_eq!(rev.total(), 3f64.ln(), max_relative = 1e-15);
        // element 2 first: Pr[2 ∈ A] = 1/3
        assert_relative_eq!(rev.entries[0], h(1.0 / 3.0), max_relative = 1e-15);
        assert!(d.chain_profile_with_order(&[0, 0]).is_err());
    }

    #[test]
    fn mixture_examples() {
        let single = ProductMixture::new(10, vec![MixtureComponent { weight: 1.0, inclusion: 0.3 }]).unwrap();
        let b = single.entropy_bounds();
        assert_relative_eq!(b.lower, 10.0 * h(0.3), max_relative = 1e-14);
        assert_eq!(b.lower, b.upper);

        let two = example2_distribution(0.5, 8).unwrap();
        let b = two.entropy_bounds();
        assert!(b.upper - b.lower <= std::f64::consts::LN_2);
        let exact = two.expand().unwrap().entropy();
        assert!(b.lower <= exact && exact <= b.upper);
    }

    #[test]
    fn example_constructors() {
        let e = example1_distribution(0.5, 2).unwrap();
        assert!(e.probs().iter().all(|&p| (p - 0.25).abs() < 1e-16));
        let e = example1_distribution(0.2, 3).unwrap();
        assert_relative_eq!(e.entropy(), 3.0 * h(0.2), max_relative = 1e-14);
        assert!(e.marginals().iter().all(|&x| (x - 0.2).abs() < 1e-14));

        let at = example2_distribution(GOLDEN_THRESHOLD, 5).unwrap();
        assert_relative_eq!(at.components()[0].weight, 1.0, max_relative = 1e-15);
        let top = example2_distribution(1.0, 5).unwrap();
        assert_eq!(top.components(), &[MixtureComponent { weight: 1.0, inclusion: 1.0 }]);
        assert_eq!(top.expand().unwrap().prob(SubsetMask::full(5)), 1.0);
        assert!(example2_distribution(0.3, 5).is_err());
    }

    #[test]
    fn theorem2_examples() {
        for u in [0.05, 0.2, 0.3, GOLDEN_THRESHOLD] {
            let r = verify_theorem2(&example1_distribution(u, 6).unwrap()).unwrap();
            assert!(r.slack.abs() < 1e-10, "u={u} slack={}", r.slack);
            assert!(r.equality);
        }
        let r = verify_theorem2(&example2_distribution(0.5, 12).unwrap().expand().unwrap()).unwrap();
        assert!(r.slack > 0.0 && r.slack < 1.0);
        let pm = ExplicitSetDistribution::point_mass(2, SubsetMask::EMPTY).unwrap();
        assert!(matches!(verify_theorem2(&pm), Err(Error::Degenerate(_))));
    }

    #[test]
    fn text_round_trip() {
        let d = chain3();
        let back = ExplicitSetDistribution::parse(&d.to_text()).unwrap();
        assert_eq!(back, d);
        let mix = example2_distribution(0.6, 1000).unwrap();
        assert_eq!(ProductMixture::parse(&mix.to_text()).unwrap(), mix);
        assert!(ExplicitSetDistribution::parse("n=2\nzz 1.0\n").is_err());
        assert!(ExplicitSetDistribution::parse("2\n0 1.0\n").is_err());
        let commented = "# comment\nn=1\n0x1 0.5 # tail\n0 0.5\n";
        assert_eq!(ExplicitSetDistribution::parse(commented).unwrap().marginal(0).unwrap(), 0.5);
    }

    #[test]
    fn battery_and_asymptotics() {
        let b = theorem2_battery(50, 5, 7, THEOREM2_TOL).unwrap();
        assert!(b.passed, "{b:?}");
        let a = example2_asymptotics(0.5, &[8, 10]).unwrap();
        assert!(a.points.iter().all(|p| p.ratio > a.lambda));
    }
}

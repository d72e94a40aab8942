//! Union-closed families on small ground sets.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lambda_unchecked, GOLDEN_THRESHOLD};
use crate::set_dist::{parse_header, parse_hex_mask, ExplicitSetDistribution, SubsetMask, MAX_EXPLICIT_N};

/// Largest ground set accepted by exhaustive enumeration.
pub const MAX_ENUMERATION_N: u32 = 4;

/// Largest ground set accepted by the entropy diagnostics.
pub const MAX_DIAGNOSTICS_N: u32 = 12;

/// A nonempty family of distinct subsets, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Family {
    n: u32,
    sets: Vec<SubsetMask>,
}

impl Family {
    pub fn new<I: IntoIterator<Item = SubsetMask>>(n: u32, sets: I) -> Result<Self> {
        if n > MAX_EXPLICIT_N {
            return Err(Error::TooLarge { n: n as u64, limit: MAX_EXPLICIT_N as u64, context: "family" });
        }
        let mut sets: Vec<SubsetMask> = sets.into_iter().collect();
        if let Some(bad) = sets.iter().find(|s| !s.fits(n)) {
            return Err(Error::MaskOutOfRange { mask: bad.0 as u64, n });
        }
        sets.sort_unstable();
        sets.dedup();
        if sets.is_empty() {
            return Err(Error::EmptyFamily);
        }
        Ok(Self { n, sets })
    }

    /// All `2ⁿ` subsets.
    pub fn powerset(n: u32) -> Result<Self> {
        Self::new(n, (0..1u32 << n).map(SubsetMask))
    }

    /// Decodes a characteristic vector over the powerset: bit `m` of `code`
    /// set iff mask `m` is a member.
    pub fn from_code(n: u32, code: u64) -> Result<Self> {
        Self::new(n, (0..1u32 << n).filter(|&m| code >> m & 1 == 1).map(SubsetMask))
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn sets(&self) -> &[SubsetMask] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// `{∅}`, the family with no nonempty member.
    pub fn is_trivial(&self) -> bool {
        self.sets == [SubsetMask::EMPTY]
    }

    pub fn contains(&self, s: SubsetMask) -> bool {
        self.sets.binary_search(&s).is_ok()
    }

    fn membership(&self) -> Vec<bool> {
        let mut member = vec![false; 1usize << self.n];
        for s in &self.sets {
            member[s.0 as usize] = true;
        }
        member
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (n, body) = parse_header(text)?;
        let n = u32::try_from(n).map_err(|_| Error::Parse { line: 1, msg: "n too large".into() })?;
        let sets = body
            .into_iter()
            .map(|(line, field)| parse_hex_mask(field, line))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, sets)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("n={}\n", self.n);
        for s in &self.sets {
            let _ = writeln!(out, "{:x}", s.0);
        }
        out
    }

    /// Uniform distribution on the members.
    pub fn uniform(&self) -> Result<ExplicitSetDistribution> {
        ExplicitSetDistribution::uniform_on(self.n, &self.sets)
    }
}

/// True iff `S ∪ T ∈ F` for all members `S`, `T`.
pub fn is_union_closed(f: &Family) -> bool {
    let member = f.membership();
    f.sets
        .iter()
        .enumerate()
        .all(|(k, a)| f.sets[k + 1..].iter().all(|b| member[(a.0 | b.0) as usize]))
}

/// Smallest union-closed family containing `g`.
pub fn union_closure(g: &Family) -> Family {
    let mut member = g.membership();
    let mut sets = g.sets.clone();
    let mut frontier = 0;
    // every pair (i, j) with j < len is processed once when the later index arrives
    while frontier < sets.len() {
        let s = sets[frontier];
        for k in 0..frontier {
            let u = s.0 | sets[k].0;
            if !member[u as usize] {
                member[u as usize] = true;
                sets.push(SubsetMask(u));
            }
        }
        frontier += 1;
    }
    Family::new(g.n, sets).expect("closure of a valid family is valid")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyReport {
    pub counts: Vec<usize>,
    pub family_size: usize,
    /// Smallest index among the most frequent elements; `None` if no element
    /// occurs at all.
    pub best_element: Option<u32>,
    pub best_proportion: f64,
    pub degenerate: bool,
}

pub fn max_element_frequency(f: &Family) -> FrequencyReport {
    let counts: Vec<usize> = (0..f.n)
        .map(|i| f.sets.iter().filter(|s| s.contains(i)).count())
        .collect();
    let best = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .fold(None, |best: Option<(usize, usize)>, (i, &c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((i, c)),
        });
    FrequencyReport {
        family_size: f.len(),
        best_element: best.map(|(i, _)| i as u32),
        best_proportion: best.map_or(0.0, |(_, c)| c as f64 / f.len() as f64),
        degenerate: best.is_none(),
        counts,
    }
}

/// Every nonempty union-closed family on `[n]`, in increasing order of the
/// powerset characteristic vector.
pub fn enumerate_union_closed(n: u32) -> Result<UnionClosedFamilies> {
    if n > MAX_ENUMERATION_N {
        return Err(Error::TooLarge {
            n: n as u64,
            limit: MAX_ENUMERATION_N as u64,
            context: "exhaustive enumeration",
        });
    }
    Ok(UnionClosedFamilies { n, next: 1, end: 1u64 << (1u32 << n) })
}

/// Iterator returned by [`enumerate_union_closed`].
#[derive(Clone, Debug)]
pub struct UnionClosedFamilies {
    n: u32,
    next: u64,
    end: u64,
}

impl UnionClosedFamilies {
    /// Number of candidate characteristic vectors, including the empty one.
    pub fn candidates(&self) -> u64 {
        self.end
    }
}

fn code_is_union_closed(code: u64, size: u32) -> bool {
    (0..size).filter(|&a| code >> a & 1 == 1).all(|a| {
        (a + 1..size)
            .filter(|&b| code >> b & 1 == 1)
            .all(|b| code >> (a | b) & 1 == 1)
    })
}

impl Iterator for UnionClosedFamilies {
    type Item = Family;

    fn next(&mut self) -> Option<Family> {
        let size = 1u32 << self.n;
        while self.next < self.end {
            let code = self.next;
            self.next += 1;
            if code_is_union_closed(code, size) {
                return Some(Family::from_code(self.n, code).expect("nonzero code"));
            }
        }
        None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    pub n: u32,
    pub candidates: u64,
    pub union_closed_families: u64,
    /// `{∅}` has no element at all and is reported separately.
    pub degenerate_excluded: u64,
    pub families_checked: u64,
    pub min_best_proportion: f64,
    /// Largest family attaining the minimum (earliest in canonical order on ties).
    pub witness: Family,
    pub witness_best_element: Option<u32>,
    pub threshold: f64,
    pub holds: bool,
}

pub fn verify_theorem1(n: u32) -> Result<Theorem1Report> {
    let families = enumerate_union_closed(n)?;
    let candidates = families.candidates();
    let (mut total, mut excluded, mut checked) = (0u64, 0u64, 0u64);
    let mut best: Option<(f64, Family, FrequencyReport)> = None;
    for f in families {
        total += 1;
        if f.is_trivial() {
            excluded += 1;
            continue;
        }
        checked += 1;
        let freq = max_element_frequency(&f);
        let better = match &best {
            None => true,
            Some((p, w, _)) => freq.best_proportion < *p || (freq.best_proportion == *p && f.len() > w.len()),
        };
        if better {
            best = Some((freq.best_proportion, f, freq));
        }
    }
    let (min, witness, freq) = best.ok_or(Error::Degenerate("no family with a nonempty member"))?;
    Ok(Theorem1Report {
        n,
        candidates,
        union_closed_families: total,
        degenerate_excluded: excluded,
        families_checked: checked,
        min_best_proportion: min,
        witness,
        witness_best_element: freq.best_element,
        threshold: GOLDEN_THRESHOLD,
        holds: min >= GOLDEN_THRESHOLD,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostic {
    pub element: u32,
    pub marginal: f64,
    /// Elements present in every member are not evaluated.
    pub skipped: bool,
    pub single: f64,
    pub union_own_prefix: f64,
    pub union_joint_prefix: f64,
    /// `union_own_prefix − λ·single`.
    pub slack: f64,
    /// `union_own_prefix − union_joint_prefix`, nonnegative by data processing.
    pub data_processing_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub n: u32,
    pub family_size: usize,
    pub h_a: f64,
    pub h_union: f64,
    pub max_entropy_holds: bool,
    pub u: f64,
    pub lambda: Option<f64>,
    pub steps: Vec<StepDiagnostic>,
    pub min_slack: f64,
}

/// Entropy bookkeeping for independent uniform samples `A`, `B` from `F`.
pub fn entropy_chain_diagnostics(f: &Family) -> Result<ChainDiagnostics> {
    if f.n > MAX_DIAGNOSTICS_N {
        return Err(Error::TooLarge {
            n: f.n as u64,
            limit: MAX_DIAGNOSTICS_N as u64,
            context: "entropy diagnostics",
        });
    }
    if !is_union_closed(f) {
        return Err(Error::NotUnionClosed);
    }
    let d = f.uniform()?;
    let h_a = d.entropy();
    let h_union = d.union_with(&d)?.entropy();
    let profile = d.induction_profile()?;
    let is_full = |p: f64| p >= 1.0 - 1e-12;
    let u = profile
        .iter()
        .map(|s| s.marginal)
        .filter(|&p| !is_full(p))
        .fold(0.0, f64::max);
    let lambda = (u > 0.0).then(|| lambda_unchecked(u));
    let steps: Vec<StepDiagnostic> = profile
        .into_iter()
        .map(|s| {
            let skipped = is_full(s.marginal) || lambda.is_none();
            let slack = match (skipped, lambda) {
                (false, Some(l)) => s.union_own_prefix - l * s.single,
                _ => 0.0,
            };
            StepDiagnostic {
                element: s.element,
                marginal: s.marginal,
                skipped,
                single: s.single,
                union_own_prefix: s.union_own_prefix,
                union_joint_prefix: s.union_joint_prefix,
                slack,
                data_processing_gap: s.union_own_prefix - s.union_joint_prefix,
            }
        })
        .collect();
    let min_slack = steps
        .iter()
        .filter(|s| !s.skipped)
        .map(|s| s.slack)
        .fold(f64::INFINITY, f64::min);
    Ok(ChainDiagnostics {
        n: f.n,
        family_size: f.len(),
        h_a,
        h_union,
        max_entropy_holds: h_union <= h_a + 1e-12,
        u,
        lambda,
        steps,
        min_slack: if min_slack.is_finite() { min_slack } else { 0.0 },
    })
}

/// Closure of a few random generators, used where exhaustive enumeration is
/// out of reach. Deterministic for a given RNG state.
pub fn random_union_closed<R: Rng + ?Sized>(n: u32, generators: usize, rng: &mut R) -> Result<Family> {
    if n == 0 || n > MAX_EXPLICIT_N {
        return Err(Error::InvalidParams(format!("random families need 1 <= n <= {MAX_EXPLICIT_N}")));
    }
    let mut sets: Vec<SubsetMask> = (0..generators.max(1))
        .map(|_| SubsetMask(rng.gen_range(0..1u32 << n)))
        .collect();
    if rng.gen_bool(0.5) {
        sets.push(SubsetMask::EMPTY);
    }
    Ok(union_closure(&Family::new(n, sets)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fam(n: u32, sets: &[&[u32]]) -> Family {
        Family::new(n, sets.iter().map(|s| SubsetMask::from_elements(s.iter().copied()))).unwrap()
    }

    #[test]
    fn union_closed_examples() {
        assert!(is_union_closed(&Family::powerset(2).unwrap()));
        assert!(!is_union_closed(&fam(2, &[&[0], &[1]])));
        assert!(is_union_closed(&fam(2, &[&[], &[0], &[0, 1]])));
    }

    #[test]
    fn closure_examples() {
        assert_eq!(union_closure(&fam(2, &[&[0], &[1]])), fam(2, &[&[0], &[1], &[0, 1]]));
        let closed = fam(2, &[&[], &[0], &[0, 1]]);
        assert_eq!(union_closure(&closed), closed);
        let c = union_closure(&fam(3, &[&[0], &[1], &[2]]));
        assert_eq!(c, fam(3, &[&[0], &[1], &[2], &[0, 1], &[0, 2], &[1, 2], &[0, 1, 2]]));
    }

    #[test]
    fn frequency_examples() {
        let r = max_element_frequency(&Family::powerset(2).unwrap());
        assert_eq!(r.best_proportion, 0.5);
        assert_eq!(r.best_element, Some(0));
        let r = max_element_frequency(&fam(3, &[&[0, 1, 2]]));
        assert_eq!(r.best_proportion, 1.0);
        let r = max_element_frequency(&fam(3, &[&[]]));
        assert_eq!(r.best_proportion, 0.0);
        assert!(r.degenerate);
        assert_eq!(r.best_element, None);
    }

    #[test]
    fn family_validation() {
        assert_eq!(Family::new(2, []), Err(Error::EmptyFamily));
        assert!(Family::new(2, [SubsetMask(4)]).is_err());
        let f = Family::new(2, [SubsetMask(3), SubsetMask(1), SubsetMask(3)]).unwrap();
        assert_eq!(f.sets(), &[SubsetMask(1), SubsetMask(3)]);
    }

    #[test]
    fn enumeration_n1() {
        let all: Vec<Family> = enumerate_union_closed(1).unwrap().collect();
        assert_eq!(all, vec![fam(1, &[&[]]), fam(1, &[&[0]]), fam(1, &[&[], &[0]])]);
        assert!(enumerate_union_closed(5).is_err());
    }

    #[test]
    fn theorem1_small() {
        let r = verify_theorem1(2).unwrap();
        assert_eq!(r.min_best_proportion, 0.5);
        assert_eq!(r.witness, Family::powerset(2).unwrap());
        assert_eq!(r.degenerate_excluded, 1);
        assert!(r.holds);
        let r3 = verify_theorem1(3).unwrap();
        assert!(r3.min_best_proportion >= 0.5);
    }

    #[test]
    fn diagnostics_examples() {
        let d = entropy_chain_diagnostics(&Family::powerset(3).unwrap()).unwrap();
        assert_relative_eq!(d.h_a, 8f64.ln(), max_relative = 1e-15);
        assert!(d.h_union < d.h_a);

        let d = entropy_chain_diagnostics(&fam(3, &[&[0, 1, 2]])).unwrap();
        assert_eq!((d.h_a, d.h_union), (0.0, 0.0));
        assert!(d.steps.iter().all(|s| s.skipped));

        let d = entropy_chain_diagnostics(&fam(2, &[&[], &[0], &[0, 1]])).unwrap();
        assert_relative_eq!(d.h_a, 3f64.ln(), max_relative = 1e-15);
        assert!(d.h_union <= d.h_a);
        assert!(d.min_slack >= -1e-9);

        assert_eq!(entropy_chain_diagnostics(&fam(2, &[&[0], &[1]])), Err(Error::NotUnionClosed));
    }

    #[test]
    fn text_round_trip() {
        let f = fam(3, &[&[], &[0], &[0, 2]]);
        assert_eq!(Family::parse(&f.to_text()).unwrap(), f);
        assert_eq!(f.to_text(), "n=3\n0\n1\n5\n");
    }
}

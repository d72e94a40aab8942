//! The geometric mixture of product distributions for which `H(A∪B)` stays
//! below `d·H(A)` while `D(A∪B || A)` remains bounded as `n` grows.
//!
//! `k` is geometric with parameter θ and, given `k`, each element lies in `A`
//! independently with probability `1 − (1−ū)^(k+1)`. The law of `k` is
//! truncated at `K` with the tail folded into component `K`.

use serde::{Deserialize, Serialize};

use crate::error::{check_open_prob, Error, Result};
use crate::numeric::compensated_sum;
use crate::scalar::{h, lambda_ratio_branch};
use crate::set_dist::{kl_divergence, union_of_independent, MixtureComponent, ProductMixture};

/// Tail mass `θ^(K+1)` allowed by the truncation.
pub const TAIL_TOL: f64 = 1e-12;
/// Largest `n` for [`exact_small_n_check`].
pub const MAX_EXACT_N: u64 = 12;
/// Largest truncation for [`exact_small_n_check`].
pub const MAX_EXACT_K: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleParams {
    pub u_bar: f64,
    pub u: f64,
    pub d: f64,
    pub theta: f64,
    pub n: u64,
    /// Truncation index `K`.
    pub k_max: usize,
}

/// `ceil(30 / −ln θ)`.
pub fn default_truncation(theta: f64) -> usize {
    (30.0 / -theta.ln()).ceil().max(1.0) as usize
}

impl CounterexampleParams {
    /// Parameters with the default truncation, validated.
    pub fn new(u_bar: f64, u: f64, d: f64, theta: f64, n: u64) -> Result<Self> {
        let theta = check_open_prob("theta", theta)?;
        let p = Self { u_bar, u, d, theta, n, k_max: default_truncation(theta) };
        p.validate()?;
        Ok(p)
    }

    pub fn with_truncation(mut self, k_max: usize) -> Result<Self> {
        self.k_max = k_max;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_open_prob("u_bar", self.u_bar)?;
        check_open_prob("u", self.u)?;
        check_open_prob("theta", self.theta)?;
        if self.u_bar >= self.u {
            return Err(Error::InvalidParams(format!("need u_bar < u, got {} >= {}", self.u_bar, self.u)));
        }
        let target = self.limit_ratio();
        if !(self.d > target) {
            return Err(Error::InvalidParams(format!("need d > {target}, got {}", self.d)));
        }
        if self.n == 0 {
            return Err(Error::InvalidParams("n must be positive".into()));
        }
        if self.theta.powf(self.k_max as f64 + 1.0) >= TAIL_TOL {
            return Err(Error::InvalidParams(format!("truncation K = {} leaves tail mass above {TAIL_TOL}", self.k_max)));
        }
        Ok(())
    }

    /// `H(2ū−ū²)/H(ū)`, the limit of the ratio bound as θ → 0.
    pub fn limit_ratio(&self) -> f64 {
        lambda_ratio_branch(self.u_bar).unwrap_or(f64::NAN)
    }

    /// Folded geometric weights for `k = 0..=K`.
    pub fn weights(&self) -> Vec<f64> {
        let t = self.theta;
        let mut w: Vec<f64> = (0..self.k_max).map(|k| (1.0 - t) * t.powi(k as i32)).collect();
        w.push(t.powi(self.k_max as i32));
        let total = compensated_sum(w.iter().copied());
        w.iter_mut().for_each(|x| *x /= total);
        w
    }

    /// `1 − (1−ū)^(k+1)`.
    pub fn inclusion(&self, k: usize) -> f64 {
        -((k as f64 + 1.0) * (-self.u_bar).ln_1p()).exp_m1()
    }
}

pub fn build_counterexample(params: &CounterexampleParams) -> Result<ProductMixture> {
    params.validate()?;
    let components = params
        .weights()
        .into_iter()
        .enumerate()
        .map(|(k, weight)| MixtureComponent { weight, inclusion: params.inclusion(k) })
        .collect();
    ProductMixture::new(params.n, components)
}

/// `1 − (1−θ)(1−ū)/(1 − θ(1−ū))`.
pub fn marginal_inclusion(params: &CounterexampleParams) -> Result<f64> {
    params.validate()?;
    let (t, c) = (params.theta, 1.0 - params.u_bar);
    Ok(1.0 - (1.0 - t) * c / (1.0 - t * c))
}

/// `n·Σ_k w_k·H((1−ū)^(k+1))`.
pub fn entropy_lower_bound(params: &CounterexampleParams) -> Result<f64> {
    params.validate()?;
    let per_element = compensated_sum(params.weights().iter().enumerate().map(|(k, w)| w * h(params.inclusion(k))));
    Ok(params.n as f64 * per_element)
}

/// Law of `k′ = k_A + k_B + 1` under the truncated weights, indexed by `k′`
/// (entry 0 is zero).
pub fn k_prime_pmf(params: &CounterexampleParams) -> Result<Vec<f64>> {
    params.validate()?;
    let w = params.weights();
    let mut pmf = vec![0.0; 2 * w.len()];
    for (a, wa) in w.iter().enumerate() {
        for (b, wb) in w.iter().enumerate() {
            pmf[a + b + 1] += wa * wb;
        }
    }
    Ok(pmf)
}

/// Entropy of the law of `k′`.
pub fn k_prime_entropy(params: &CounterexampleParams) -> Result<f64> {
    let pmf = k_prime_pmf(params)?;
    Ok(compensated_sum(pmf.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln())))
}

/// `H(k′) + n·Σ_{k′} Pr[k′]·H((1−ū)^(k′+1))`.
pub fn union_entropy_upper_bound(params: &CounterexampleParams) -> Result<f64> {
    let pmf = k_prime_pmf(params)?;
    let per_element = compensated_sum(pmf.iter().enumerate().map(|(k, p)| p * h(params.inclusion(k))));
    Ok(k_prime_entropy(params)? + params.n as f64 * per_element)
}

pub fn ratio_bound(params: &CounterexampleParams) -> Result<f64> {
    Ok(union_entropy_upper_bound(params)? / entropy_lower_bound(params)?)
}

/// `Σ_{k′≥1} (1−θ)²k′θ^(k′−1)·(−k′ ln θ − ln(1−θ))`, summed until the terms
/// vanish in double precision. Independent of `n`.
pub fn kl_upper_bound(params: &CounterexampleParams) -> Result<f64> {
    params.validate()?;
    let t = params.theta;
    let (lt, l1t) = (t.ln(), (-t).ln_1p());
    let terms = (1..).map(|k: u32| {
        let k = k as f64;
        (1.0 - t) * (1.0 - t) * k * (lt * (k - 1.0)).exp() * (-k * lt - l1t)
    });
    let mut sum = Vec::new();
    for term in terms {
        sum.push(term);
        if term < 1e-300 || (sum.len() > 2 && term < 1e-20 * sum[0]) {
            break;
        }
    }
    Ok(compensated_sum(sum))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactValues {
    pub h_a: f64,
    pub h_union: f64,
    pub kl: f64,
    pub h_a_within_bounds: bool,
    pub h_union_within_bound: bool,
    pub kl_within_bound: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub params: CounterexampleParams,
    pub marginal: f64,
    /// Marginal at most `u`.
    pub admissible: bool,
    pub entropy_lower_bound: f64,
    /// Lower bound plus the entropy of the mixing weights.
    pub entropy_upper_bound: f64,
    pub k_prime_entropy: f64,
    pub union_entropy_upper_bound: f64,
    pub ratio_bound: f64,
    pub limit_ratio: f64,
    pub ratio_below_d: bool,
    pub kl_upper_bound: f64,
    pub exact: Option<ExactValues>,
}

impl CounterexampleReport {
    /// Admissible, ratio below `d`, and exact values (when present) within bounds.
    pub fn passed(&self) -> bool {
        self.admissible
            && self.ratio_below_d
            && self
                .exact
                .as_ref()
                .is_none_or(|e| e.h_a_within_bounds && e.h_union_within_bound && e.kl_within_bound)
    }
}

/// All bounds; exact values are added when `n ≤ 12` and `K ≤ 20`.
pub fn counterexample_report(params: &CounterexampleParams) -> Result<CounterexampleReport> {
    let mixture = build_counterexample(params)?;
    let bounds = mixture.entropy_bounds();
    let marginal = marginal_inclusion(params)?;
    let union_upper = union_entropy_upper_bound(params)?;
    let ratio = ratio_bound(params)?;
    let kl_upper = kl_upper_bound(params)?;
    let exact = if params.n <= MAX_EXACT_N && params.k_max <= MAX_EXACT_K {
        let a = mixture.expand()?;
        let union = union_of_independent(&a, &a)?;
        let (h_a, h_union, kl) = (a.entropy(), union.entropy(), kl_divergence(&union, &a)?);
        let slack = 1e-12 * (1.0 + h_a);
        Some(ExactValues {
            h_a,
            h_union,
            kl,
            h_a_within_bounds: h_a >= bounds.lower - slack && h_a <= bounds.upper + slack,
            h_union_within_bound: h_union <= union_upper + slack,
            kl_within_bound: kl <= kl_upper + 1e-12,
        })
    } else {
        None
    };
    Ok(CounterexampleReport {
        params: params.clone(),
        marginal,
        admissible: marginal <= params.u,
        entropy_lower_bound: bounds.lower,
        entropy_upper_bound: bounds.upper,
        k_prime_entropy: k_prime_entropy(params)?,
        union_entropy_upper_bound: union_upper,
        ratio_bound: ratio,
        limit_ratio: params.limit_ratio(),
        ratio_below_d: ratio < params.d,
        kl_upper_bound: kl_upper,
        exact,
    })
}

/// Expands the mixture at small `n` and checks the exact entropies and KL
/// divergence against every bound.
pub fn exact_small_n_check(params: &CounterexampleParams) -> Result<CounterexampleReport> {
    if params.n > MAX_EXACT_N {
        return Err(Error::TooLarge { n: params.n, limit: MAX_EXACT_N, context: "exact counterexample check" });
    }
    if params.k_max > MAX_EXACT_K {
        return Err(Error::TooLarge { n: params.k_max as u64, limit: MAX_EXACT_K as u64, context: "counterexample truncation" });
    }
    counterexample_report(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo(n: u64) -> CounterexampleParams {
        CounterexampleParams::new(0.2, 0.25, 1.35, 0.01, n).unwrap()
    }

    #[test]
    fn validation() {
        assert!(CounterexampleParams::new(0.3, 0.25, 1.35, 0.01, 10).is_err());
        assert!(CounterexampleParams::new(0.2, 0.25, 1.3, 0.01, 10).is_err());
        assert!(CounterexampleParams::new(0.2, 0.25, 1.35, 1.0, 10).is_err());
        assert!(demo(10).with_truncation(2).is_err());
        assert_eq!(demo(10).k_max, 7);
    }

    #[test]
    fn weights_are_geometric() {
        let p = CounterexampleParams::new(0.2, 0.25, 1.35, 0.1, 10).unwrap().with_truncation(30).unwrap();
        let w = p.weights();
        assert!((w[0] - 0.9).abs() < 1e-15);
        assert!((w[1] - 0.09).abs() < 1e-15);
        assert!((w[2] - 0.009).abs() < 1e-16);
        assert!((compensated_sum(w.iter().copied()) - 1.0).abs() < 1e-15);
        assert!((p.inclusion(0) - 0.2).abs() < 1e-16);
    }

    #[test]
    fn marginal_closed_form() {
        let p = CounterexampleParams::new(0.2, 0.25, 1.35, 0.1, 10).unwrap();
        assert!((marginal_inclusion(&p).unwrap() - 0.217_391_304_347_826_09).abs() < 1e-15);
        let series = compensated_sum((0..=40).map(|k| 0.9 * 0.1f64.powi(k) * p.inclusion(k as usize)));
        assert!((marginal_inclusion(&p).unwrap() - series).abs() < 1e-12);
        let tiny = CounterexampleParams::new(0.2, 0.25, 1.35, 1e-13, 10).unwrap();
        assert!((marginal_inclusion(&tiny).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_is_linear_in_n() {
        let a = entropy_lower_bound(&demo(1000)).unwrap();
        let b = entropy_lower_bound(&demo(2000)).unwrap();
        assert_eq!(b, 2.0 * a);
    }

    #[test]
    fn k_prime_pmf_matches_negative_binomial() {
        let p = CounterexampleParams::new(0.2, 0.25, 1.35, 0.1, 10).unwrap();
        let pmf = k_prime_pmf(&p).unwrap();
        assert!((compensated_sum(pmf.iter().copied()) - 1.0).abs() < 1e-14);
        for k in 1..=p.k_max {
            let exact = 0.81 * k as f64 * 0.1f64.powi(k as i32 - 1);
            assert!((pmf[k] - exact).abs() < 1e-15, "k' = {k}");
        }
        let hk = k_prime_entropy(&p).unwrap();
        assert!(hk > 0.0 && hk < 1.0);
    }

    #[test]
    fn kl_bound_closed_form() {
        let p = CounterexampleParams::new(0.2, 0.25, 1.35, 0.1, 10).unwrap();
        assert!((kl_upper_bound(&p).unwrap() - 2.919_631_184_872_771).abs() < 1e-10);
        assert!((kl_upper_bound(&demo(10)).unwrap() - 4.708_254_262_972_665).abs() < 1e-10);
        assert_eq!(kl_upper_bound(&demo(100)).unwrap(), kl_upper_bound(&demo(1_000_000)).unwrap());
    }

    #[test]
    fn ratio_approaches_limit() {
        let big = ratio_bound(&demo(1_000_000)).unwrap();
        let limit = demo(1).limit_ratio();
        assert!((big - limit).abs() < 0.05);
        assert!(ratio_bound(&demo(100_000)).unwrap() < 1.35);
    }

    #[test]
    fn exact_check_brackets() {
        let r = exact_small_n_check(&CounterexampleParams::new(0.2, 0.25, 1.35, 0.1, 8).unwrap()).unwrap();
        let e = r.exact.unwrap();
        assert!(e.h_a_within_bounds && e.h_union_within_bound && e.kl_within_bound, "{e:?}");
        assert!(exact_small_n_check(&demo(13)).is_err());
    }
}

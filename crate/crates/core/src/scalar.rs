//! Closed-form scalar functions: binary entropy, the union map, the golden
//! threshold, the piecewise ratio λ(u), F(s) = H(s²)/(sH(s)) and the two
//! third-derivative formulas used in its monotonicity analysis.
//!
//! All entropies are in nats.

use serde::{Deserialize, Serialize};

use crate::error::{check_open_prob, check_prob, Result};
use crate::numeric::{central_third, open_unit_grid, rel_err, third_derivative_step};

/// (3 − √5)/2, the threshold where H(u) = H(2u − u²).
pub const GOLDEN_THRESHOLD: f64 = 0.381_966_011_250_105_15;

/// (√5 − 1)/2 = 1 − GOLDEN_THRESHOLD = 1/φ.
pub const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// φ = (√5 + 1)/2 = 2/(√5 − 1).
pub const PHI: f64 = 1.618_033_988_749_895;

/// Limit of the ratio branch H(2u − u²)/H(u) as u → 0⁺.
///
/// `lambda` itself rejects u = 0; callers that need the endpoint use this.
pub const LAMBDA_LIMIT_AT_ZERO: f64 = 2.0;

#[inline]
fn xlnx(x: f64) -> f64 {
    if x <= 1e-300 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Binary entropy without domain checks.
///
/// Evaluates the smaller of p, 1 − p directly and the larger one through
/// `ln_1p`, so values near either endpoint keep full relative accuracy.
#[inline]
pub fn h(p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p), "h({p})");
    let small = if p <= 0.5 { p } else { 1.0 - p };
    if small <= 1e-300 {
        return 0.0;
    }
    let large = 1.0 - small;
    -xlnx(small) - large * (-small).ln_1p()
}

/// Binary entropy from a probability and its complement, each supplied to
/// full precision (`p + q = 1` up to rounding).
#[inline]
pub fn h_pair(p: f64, q: f64) -> f64 {
    -xlnx(p) - xlnx(q)
}

/// H(p + q − pq) with the complement (1 − p)(1 − q) formed directly.
#[inline]
pub fn h_union(p: f64, q: f64) -> f64 {
    let c = (1.0 - p) * (1.0 - q);
    let x = p + q * (1.0 - p);
    if x <= 0.5 {
        h(x)
    } else {
        h_pair(1.0 - c, c)
    }
}

/// Shannon entropy of a Bernoulli(p) variable, in nats.
pub fn binary_entropy(p: f64) -> Result<f64> {
    Ok(h(check_prob("p", p)?))
}

/// Probability of `i ∈ A ∪ B` for independent events of probability p, q.
pub fn union_prob(p: f64, q: f64) -> Result<f64> {
    let p = check_prob("p", p)?;
    let q = check_prob("q", q)?;
    Ok(p + q - p * q)
}

pub fn golden_threshold() -> f64 {
    GOLDEN_THRESHOLD
}

/// H(2u − u²)/H(u), the branch of λ used below the golden threshold.
pub fn lambda_ratio_branch(u: f64) -> Result<f64> {
    let u = check_open_prob("u", u)?;
    Ok(ratio_branch(u))
}

#[inline]
fn ratio_branch(u: f64) -> f64 {
    let c = (1.0 - u) * (1.0 - u);
    h_pair(u * (2.0 - u), c) / h(u)
}

/// (1 − u)·2/(√5 − 1), the branch of λ used above the golden threshold.
pub fn lambda_linear_branch(u: f64) -> Result<f64> {
    let u = check_prob("u", u)?;
    Ok((1.0 - u) * PHI)
}

/// The piecewise lower-bound ratio λ(u) for u in (0, 1).
pub fn lambda(u: f64) -> Result<f64> {
    let u = check_open_prob("u", u)?;
    Ok(lambda_unchecked(u))
}

#[inline]
pub(crate) fn lambda_unchecked(u: f64) -> f64 {
    if u <= GOLDEN_THRESHOLD {
        ratio_branch(u)
    } else {
        (1.0 - u) * PHI
    }
}

/// F(s) = H(s²)/(s·H(s)); lies in (φ, 2) on (0, 1) with its minimum at 1/φ.
pub fn ratio_f(s: f64) -> Result<f64> {
    let s = check_open_prob("s", s)?;
    Ok(h_square(s) / (s * h(s)))
}

#[inline]
fn h_square(s: f64) -> f64 {
    h_pair(s * s, (1.0 - s) * (1.0 + s))
}

/// Third derivative of s ↦ H(s²): (−4 − 4s²)/(s(1 − s²)²).
pub fn d3_h_square(s: f64) -> Result<f64> {
    let s = check_open_prob("s", s)?;
    let t = (1.0 - s) * (1.0 + s);
    Ok((-4.0 - 4.0 * s * s) / (s * t * t))
}

/// Third derivative of s ↦ s·H(s): (s − 2)/(s(1 − s)²).
pub fn d3_s_h(s: f64) -> Result<f64> {
    let s = check_open_prob("s", s)?;
    Ok((s - 2.0) / (s * (1.0 - s) * (1.0 - s)))
}

/// Numerator of d³/ds³ [H(s²) − β·s·H(s)] over the common denominator
/// s(1 − s²)²: the cubic −4 − 4s² − β(s − 2)(1 + s)².
pub fn third_deriv_numerator(s: f64, beta: f64) -> f64 {
    -4.0 - 4.0 * s * s - beta * (s - 2.0) * (1.0 + s) * (1.0 + s)
}

/// 2s·H(s) − H(s²), strictly positive on (0, 1).
pub fn easier_inequality_slack(s: f64) -> Result<f64> {
    let s = check_open_prob("s", s)?;
    Ok(2.0 * s * h(s) - h_square(s))
}

/// Tolerance of the golden-threshold identities.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Tolerance of the minimum of F against φ.
pub const F_MIN_TOL: f64 = 1e-6;
/// Relative-error budget of the finite-difference check of the third derivatives.
pub const FD_TOL: f64 = 1e-4;

/// Results of [`scalar_suite`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarSuite {
    pub grid: usize,
    /// `|λ(u*) − 1|`.
    pub lambda_golden_err: f64,
    /// `|H(u*) − H(1 − u*)|`.
    pub entropy_symmetry_err: f64,
    /// Gap between the two branches of λ at u*.
    pub branch_gap: f64,
    pub f_argmin: f64,
    pub f_min: f64,
    /// Strictly decreasing before the grid minimizer, strictly increasing after.
    pub f_unimodal: bool,
    /// Largest relative error of both third-derivative formulas against
    /// central differences on [0.05, 0.95].
    pub fd_max_rel_err: f64,
    pub easier_min_slack: f64,
    pub failures: Vec<String>,
}

impl ScalarSuite {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks the golden identities, the shape of F, the third-derivative
/// formulas and `H(s²) < 2sH(s)` on a grid of `grid` interior points.
/// `identity_tol` bounds the three golden-threshold identities.
pub fn scalar_suite(grid: usize, identity_tol: f64) -> Result<ScalarSuite> {
    if grid < 3 || !(identity_tol > 0.0) {
        return Err(crate::Error::InvalidParams("scalar grid needs at least 3 points and a positive tolerance".into()));
    }
    let u = GOLDEN_THRESHOLD;
    let lambda_golden_err = (lambda_unchecked(u) - 1.0).abs();
    let entropy_symmetry_err = (h(u) - h(1.0 - u)).abs();
    let branch_gap = (ratio_branch(u) - (1.0 - u) * PHI).abs();

    let xs: Vec<f64> = open_unit_grid(grid).collect();
    let fs: Vec<f64> = xs.iter().map(|&s| h_square(s) / (s * h(s))).collect();
    let k = (0..fs.len()).min_by(|&a, &b| fs[a].total_cmp(&fs[b])).expect("nonempty grid");
    let f_unimodal = fs[..=k].windows(2).all(|w| w[1] < w[0]) && fs[k..].windows(2).all(|w| w[1] > w[0]);

    let mut fd_max_rel_err = 0.0f64;
    for &s in xs.iter().filter(|&&s| (0.05..=0.95).contains(&s)) {
        let step = third_derivative_step(s);
        let t = (1.0 - s) * (1.0 + s);
        let exact_sq = (-4.0 - 4.0 * s * s) / (s * t * t);
        let exact_sh = (s - 2.0) / (s * (1.0 - s) * (1.0 - s));
        let fd_sq = central_third(h_square, s, step);
        let fd_sh = central_third(|x| x * h(x), s, step);
        fd_max_rel_err = fd_max_rel_err.max(rel_err(fd_sq, exact_sq, 0.0)).max(rel_err(fd_sh, exact_sh, 0.0));
    }
    let easier_min_slack = xs.iter().map(|&s| 2.0 * s * h(s) - h_square(s)).fold(f64::INFINITY, f64::min);

    let mut failures = Vec::new();
    if lambda_golden_err > identity_tol {
        failures.push(format!("lambda(u*) differs from 1 by {lambda_golden_err:e}"));
    }
    if entropy_symmetry_err > identity_tol {
        failures.push(format!("H(u*) differs from H(1-u*) by {entropy_symmetry_err:e}"));
    }
    if branch_gap > identity_tol {
        failures.push(format!("lambda branches differ at u* by {branch_gap:e}"));
    }
    if !f_unimodal || (xs[k] - INV_PHI).abs() > 1.0 / (grid as f64 + 1.0) {
        failures.push(format!("F is not unimodal around 1/phi (grid minimizer {})", xs[k]));
    }
    if (fs[k] - PHI).abs() > F_MIN_TOL {
        failures.push(format!("min F = {} is not within {F_MIN_TOL:e} of phi", fs[k]));
    }
    if fd_max_rel_err >= FD_TOL {
        failures.push(format!("third-derivative finite differences off by {fd_max_rel_err:e}"));
    }
    if easier_min_slack <= 0.0 {
        failures.push(format!("2sH(s) - H(s^2) reaches {easier_min_slack:e}"));
    }
    Ok(ScalarSuite {
        grid,
        lambda_golden_err,
        entropy_symmetry_err,
        branch_gap,
        f_argmin: xs[k],
        f_min: fs[k],
        f_unimodal,
        fd_max_rel_err,
        easier_min_slack,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // Reference values computed with 40-digit arithmetic.
    const H_0_2: f64 = 0.500_402_423_538_187_9;
    const H_0_25: f64 = 0.562_335_144_618_808_4;
    const H_GOLDEN: f64 = 0.665_018_386_444_003_6;

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_relative_eq!(binary_entropy(0.5).unwrap(), std::f64::consts::LN_2, max_relative = 1e-15);
        assert_relative_eq!(binary_entropy(0.2).unwrap(), H_0_2, max_relative = 1e-15);
        assert_relative_eq!(h(GOLDEN_THRESHOLD), H_GOLDEN, max_relative = 1e-15);
    }

    #[test]
    fn entropy_rejects_bad_input() {
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.5).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
        assert!(binary_entropy(f64::INFINITY).is_err());
    }

    #[test]
    fn entropy_near_endpoints() {
        // H(p) ≈ p(1 − ln p) for tiny p
        let p: f64 = 1e-12;
        let approx = p * (1.0 - p.ln());
        assert_relative_eq!(h(p), approx, max_relative = 1e-10);
        assert_relative_eq!(h(1.0 - 1e-9), h(1e-9), max_relative = 1e-6);
    }

    #[test]
    fn union_examples() {
        assert_eq!(union_prob(0.0, 0.37).unwrap(), 0.37);
        assert_eq!(union_prob(1.0, 0.3).unwrap(), 1.0);
        assert_relative_eq!(union_prob(0.2, 0.3).unwrap(), 0.44, max_relative = 1e-15);
        assert!(union_prob(0.2, 1.1).is_err());
    }

    #[test]
    fn golden_constants() {
        let u = golden_threshold();
        assert_relative_eq!(u, (3.0 - 5f64.sqrt()) / 2.0, max_relative = 1e-15);
        assert_relative_eq!(1.0 - u, INV_PHI, max_relative = 1e-15);
        assert_relative_eq!(union_prob(u, u).unwrap(), 1.0 - u, max_relative = 1e-15);
        assert_relative_eq!(PHI, 2.0 / (5f64.sqrt() - 1.0), max_relative = 1e-15);
    }

    #[test]
    fn lambda_examples() {
        let u = GOLDEN_THRESHOLD;
        assert!((lambda(u).unwrap() - 1.0).abs() < 1e-12);
        assert!((lambda_ratio_branch(u).unwrap() - lambda_linear_branch(u).unwrap()).abs() < 1e-12);
        assert_relative_eq!(lambda(0.5).unwrap(), 0.809_016_994_374_947_4, max_relative = 1e-14);
        assert_relative_eq!(lambda(0.2).unwrap(), 1.305_785_432_000_084_2, max_relative = 1e-13);
        assert!(lambda(0.0).is_err());
        assert!(lambda(1.0).is_err());
        // the ratio branch creeps up to the endpoint limit at a logarithmic rate
        let near: Vec<f64> = [1e-3, 1e-6, 1e-9, 1e-12].iter().map(|&u| lambda(u).unwrap()).collect();
        assert!(near.windows(2).all(|w| w[0] < w[1]));
        assert!(near.iter().all(|&l| l < LAMBDA_LIMIT_AT_ZERO));
        assert!(LAMBDA_LIMIT_AT_ZERO - near[3] < 0.05);
    }

    #[test]
    fn ratio_f_examples() {
        assert_relative_eq!(ratio_f(INV_PHI).unwrap(), PHI, max_relative = 1e-13);
        assert_relative_eq!(ratio_f(0.5).unwrap(), 1.622_556_248_918_265_7, max_relative = 1e-14);
        assert!((ratio_f(1e-4).unwrap() - 2.0).abs() < 0.1);
        assert!(ratio_f(0.0).is_err());
        assert!(ratio_f(1.0).is_err());
    }

    #[test]
    fn third_derivative_examples() {
        assert_relative_eq!(d3_h_square(0.5).unwrap(), -5.0 / (0.5 * 0.5625), max_relative = 1e-14);
        assert_relative_eq!(d3_s_h(0.5).unwrap(), -12.0, max_relative = 1e-14);
        assert_relative_eq!(d3_h_square(0.9).unwrap(), -222.837_796_244_998_46, max_relative = 1e-13);
        assert_relative_eq!(d3_s_h(0.25).unwrap(), -12.444_444_444_444_445, max_relative = 1e-14);
        assert!(d3_h_square(1.0).is_err());
        assert!(d3_s_h(0.0).is_err());
    }

    #[test]
    fn numerator_examples() {
        for beta in [0.0, 0.5, 1.7, 1.99] {
            assert_relative_eq!(third_deriv_numerator(0.0, beta), 2.0 * beta - 4.0);
        }
        for s in [0.0, 0.3, 0.9] {
            assert_relative_eq!(third_deriv_numerator(s, 0.0), -4.0 - 4.0 * s * s);
        }
    }

    #[test]
    fn easier_slack_examples() {
        let expected = std::f64::consts::LN_2 - H_0_25;
        assert_relative_eq!(easier_inequality_slack(0.5).unwrap(), expected, max_relative = 1e-14);
        assert_relative_eq!(expected, 0.130_812_035_941_136_96, max_relative = 1e-14);
        assert!(easier_inequality_slack(1e-8).unwrap() < 1e-6);
        assert!(easier_inequality_slack(INV_PHI).unwrap() > 0.0);
    }

    #[test]
    fn suite_passes_on_default_grid() {
        let r = scalar_suite(100_000, IDENTITY_TOL).unwrap();
        assert!(r.passed(), "{:?}", r.failures);
        assert!(r.fd_max_rel_err < 2e-5);
    }
}

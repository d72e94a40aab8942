//! Acceptance suite: one PASS/FAIL line per criterion, each with its runtime
//! budget. Exits nonzero if any criterion fails.

mod common;

use std::f64::consts::LN_2;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{coupling_cost, small_measure_battery, vertex_enumeration_min};
use uclab::counterexample::{counterexample_report, kl_upper_bound, CounterexampleParams};
use uclab::coupling::{
    coupled_union_prob, delta_search, greedy_coupling_dp, improved_slack, worst_coupling_value, DeltaSearchOptions,
    RateConvention,
};
use uclab::families::{random_union_closed, verify_theorem1};
use uclab::measure::{lemma_certificate, sharpness_check, DiscreteMeasure, LemmaOptions};
use uclab::numeric::open_unit_grid;
use uclab::scalar::{binary_entropy, easier_inequality_slack, lambda, scalar_suite, GOLDEN_THRESHOLD, PHI};
use uclab::set_dist::{example2_asymptotics, theorem2_battery};
use uclab::DEFAULT_SEED;

/// H((3 − √5)/2) to 20 digits.
const H_GOLDEN: f64 = 0.665_018_386_444_003_570_1;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: String) -> Outcome {
    Outcome { ok, detail }
}

fn criterion<F: FnOnce() -> Outcome>(id: u32, name: &str, budget: Duration, f: F) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed < budget;
    let ok = out.ok && in_time;
    println!(
        "{} [{id:>2}] {name}: {} ({:.3} s, budget {:.3} s{})",
        if ok { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs_f64(),
        if in_time { "" } else { ", over budget" }
    );
    ok
}

fn main() {
    let mut results = Vec::new();

    results.push(criterion(1, "golden identity and threshold", Duration::from_millis(1), || {
        let u = GOLDEN_THRESHOLD;
        let lam_err = (lambda(u).unwrap() - 1.0).abs();
        let sym_err = (binary_entropy(u).unwrap() - binary_entropy(1.0 - u).unwrap()).abs();
        let closed_err = (u - (3.0 - 5f64.sqrt()) / 2.0).abs();
        outcome(
            lam_err <= 1e-12 && sym_err <= 1e-12 && closed_err <= 1e-15,
            format!("|lambda(u*)-1| = {lam_err:.1e}, |H(u*)-H(1-u*)| = {sym_err:.1e}"),
        )
    }));

    results.push(criterion(2, "two-sample inequality certificate", Duration::from_secs(60), || {
        let opts = LemmaOptions::default();
        let c = lemma_certificate(&opts).unwrap();
        let ok = opts.u_steps == 1000
            && opts.v_steps == 1000
            && c.local_restarts == 1000
            && c.worst_slack >= -1e-9
            && c.max_local_advantage <= 1e-6;
        outcome(
            ok,
            format!(
                "worst scan slack {:.3e} at u = {:.4}, {} local restarts, max local advantage {:.3e}",
                c.worst_slack, c.worst_u, c.local_restarts, c.max_local_advantage
            ),
        )
    }));

    results.push(criterion(3, "sharpness of the extremal measures", Duration::from_secs(1), || {
        let r = sharpness_check(100, 1e-12).unwrap();
        outcome(
            r.passed,
            format!("max |value| {:.2e} (Dirac), {:.2e} (two-atom)", r.max_dirac_value, r.max_two_atom_value),
        )
    }));

    results.push(criterion(4, "shape of F and third derivatives", Duration::from_secs(5), || {
        let s = scalar_suite(100_000, 1e-12).unwrap();
        let ok = s.f_unimodal && (s.f_min - PHI).abs() <= 1e-6 && s.fd_max_rel_err < 1e-4;
        outcome(
            ok,
            format!(
                "unimodal = {}, argmin {:.6}, |min F - phi| = {:.2e}, max FD rel. err {:.2e}",
                s.f_unimodal,
                s.f_argmin,
                (s.f_min - PHI).abs(),
                s.fd_max_rel_err
            ),
        )
    }));

    results.push(criterion(5, "H(s^2) < 2sH(s) on (0, 1)", Duration::from_secs(1), || {
        let min = open_unit_grid(100_000).map(|s| easier_inequality_slack(s).unwrap()).fold(f64::INFINITY, f64::min);
        outcome(min > 0.0, format!("min slack {min:.3e} over 1e5 points"))
    }));

    results.push(criterion(6, "frequency bound on [4]", Duration::from_secs(10), || {
        let r = verify_theorem1(4).unwrap();
        let ok = r.candidates == 65_536 && (r.min_best_proportion - 0.5).abs() < 1e-15 && r.holds;
        outcome(
            ok,
            format!(
                "{} candidates, {} union-closed, min best proportion {}, witness {:?}",
                r.candidates,
                r.union_closed_families,
                r.min_best_proportion,
                r.witness.sets().iter().map(|s| s.0).collect::<Vec<_>>()
            ),
        )
    }));

    results.push(criterion(7, "union entropy inequality on random laws", Duration::from_secs(30), || {
        let b = theorem2_battery(1000, 8, DEFAULT_SEED, 1e-10).unwrap();
        outcome(
            b.passed,
            format!(
                "min slack {:.3e} over {} laws, max equality gap {:.2e} over {} product laws",
                b.min_slack, b.count, b.max_equality_gap, b.equality_cases
            ),
        )
    }));

    results.push(criterion(8, "second sharp example asymptotics", Duration::from_secs(30), || {
        let a = example2_asymptotics(0.5, &[8, 10, 12]).unwrap();
        let gaps: Vec<String> = a.points.iter().map(|p| format!("n={}: {:.4}", p.n, p.scaled_gap)).collect();
        outcome(a.fitted_constant <= 3.0, format!("fitted C = {:.4} ({})", a.fitted_constant, gaps.join(", ")))
    }));

    results.push(criterion(9, "KL counterexample", Duration::from_secs(5), || {
        let at = |n| CounterexampleParams::new(0.2, 0.25, 1.35, 0.01, n).unwrap();
        let base = counterexample_report(&at(100_000)).unwrap();
        let ratios_ok = [100_000u64, 1_000_000, 10_000_000]
            .iter()
            .all(|&n| counterexample_report(&at(n)).unwrap().ratio_bound < 1.35);
        let kls: Vec<f64> = [100u64, 10_000, 1_000_000].iter().map(|&n| kl_upper_bound(&at(n)).unwrap()).collect();
        let kl_spread = kls.iter().fold(0.0f64, |m, k| m.max((k - kls[0]).abs()));
        let exact = counterexample_report(&at(10)).unwrap().exact.unwrap();
        let bracket = exact.h_a_within_bounds && exact.h_union_within_bound && exact.kl_within_bound;
        outcome(
            base.admissible && ratios_ok && kl_spread <= 1e-12 && bracket,
            format!(
                "marginal {:.6} <= 0.25, ratio bound {:.6} at n=1e5, KL bound {:.6} (spread {kl_spread:.1e}), exact n=10 bracketed = {bracket}",
                base.marginal, base.ratio_bound, kls[0]
            ),
        )
    }));

    results.push(criterion(10, "coupling machinery", Duration::from_secs(60), || {
        let mut identity = true;
        for i in 0..300 {
            for j in 0..300 {
                let (p, r) = (i as f64 / 299.0, j as f64 / 299.0);
                identity &= coupled_union_prob(p, r).unwrap() == p.max(r).max((p + r).min(0.5));
            }
        }
        let battery = small_measure_battery(300, 11);
        let lp_err = battery
            .iter()
            .map(|mu| {
                let xs: Vec<f64> = mu.atoms().iter().map(|a| a.location).collect();
                let ws: Vec<f64> = mu.atoms().iter().map(|a| a.weight).collect();
                (worst_coupling_value(mu).unwrap().value - vertex_enumeration_min(&ws, &coupling_cost(&xs))).abs()
            })
            .fold(0.0f64, f64::max);
        let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
        let mut dev = 0.0f64;
        for k in 0..100u32 {
            let f = random_union_closed(2 + k % 7, 1 + k as usize % 5, &mut rng).unwrap();
            let r = greedy_coupling_dp(&f, RateConvention::OwnPrefix).unwrap();
            dev = dev.max(r.deviation_a).max(r.deviation_c);
        }
        outcome(
            identity && lp_err <= 1e-9 && dev <= 1e-12,
            format!(
                "case identity exact = {identity}, LP vs vertices max err {lp_err:.1e} over {} measures, DP marginal deviation {dev:.1e}",
                battery.len()
            ),
        )
    }));

    results.push(criterion(11, "positive delta on the scanned class", Duration::from_secs(120), || {
        let alpha = 0.05;
        let r = delta_search(&DeltaSearchOptions { alpha, ..Default::default() }).unwrap();
        let sharp = improved_slack(&DiscreteMeasure::dirac(GOLDEN_THRESHOLD).unwrap(), alpha).unwrap();
        let expected = alpha * (LN_2 - H_GOLDEN);
        let sharp_ok = (sharp - expected).abs() <= 1e-12 && sharp > 0.0;
        outcome(
            r.delta > 0.0 && sharp_ok,
            format!(
                "delta = {:.2e} ({:?}, {} measures scanned), slack at u* {sharp:.6e} vs {expected:.6e}",
                r.delta, r.status, r.scanned
            ),
        )
    }));

    let failed = results.iter().filter(|ok| !**ok).count();
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

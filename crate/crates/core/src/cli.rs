//! Command-line driver. Each subcommand runs one verification pipeline and
//! emits a [`Report`]; the exit code is 0 when every asserted check holds,
//! 1 when one fails and 2 on bad arguments or input.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::counterexample::{counterexample_report, CounterexampleParams};
use crate::coupling::{delta_search, greedy_coupling_dp, DeltaSearchOptions, DeltaStatus, RateConvention};
use crate::families::{entropy_chain_diagnostics, is_union_closed, max_element_frequency, verify_theorem1, Family, MAX_DIAGNOSTICS_N};
use crate::measure::{lemma_certificate, sharpness_check, LemmaOptions, SCAN_TOL, SHARPNESS_TOL};
use crate::report::{Report, Table};
use crate::scalar::{scalar_suite, GOLDEN_THRESHOLD, IDENTITY_TOL};
use crate::set_dist::{example2_asymptotics, theorem2_battery, verify_theorem2, ExplicitSetDistribution, THEOREM2_TOL};
use crate::{Error, Result, DEFAULT_SEED};

/// Largest constant accepted in `|ratio − λ| ≤ C/n` for the second sharp example.
pub const ASYMPTOTIC_CONSTANT: f64 = 3.0;

#[derive(Parser, Debug, Clone, Serialize)]
#[command(name = "uclab", version, about = "Entropy-method toolkit for union-closed families")]
pub struct Cli {
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    #[serde(skip)]
    pub format: Format,
    #[arg(long, global = true, env = "UCLAB_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub jobs: Option<usize>,
    /// Overrides the main tolerance of `scalar`, `lemma` and `theorem2`.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Record wall time in the report.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub timing: bool,
    #[arg(long, global = true, hide = true, default_value_t = 1.0)]
    pub lambda_scale: f64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Closed-form identities, shape of F, third derivatives, H(s²) < 2sH(s).
    Scalar(ScalarArgs),
    /// Certificate of the two-sample inequality over measures on [0, 1].
    Lemma(LemmaArgs),
    /// Exhaustive frequency check on [n], or diagnostics of one family.
    Families(FamiliesArgs),
    /// H(A∪B) ≥ λ(u)·H(A) on a random battery or a distribution file.
    Theorem2(Theorem2Args),
    /// Bounds for the geometric mixture of product distributions.
    Counterexample(CounterexampleArgs),
    /// Worst couplings, δ search and the greedy coupling DP.
    Coupling {
        #[command(subcommand)]
        action: CouplingAction,
    },
    /// Every suite at default settings.
    All(AllArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ScalarArgs {
    #[arg(long, default_value_t = 100_000)]
    pub grid: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaMode {
    Certify,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LemmaArgs {
    #[arg(value_enum)]
    pub mode: Option<LemmaMode>,
    #[arg(long, default_value_t = 1000)]
    pub u_steps: usize,
    #[arg(long, default_value_t = 1000)]
    pub v_steps: usize,
    #[arg(long, default_value_t = 1000)]
    pub atom_grid: usize,
    #[arg(long, default_value_t = 100)]
    pub local_points: usize,
    /// Restarts per local-search point.
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    /// Grid for the sharpness check.
    #[arg(long, default_value_t = 100)]
    pub sharp_grid: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FamiliesMode {
    Enumerate,
    Check,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FamiliesArgs {
    #[arg(value_enum)]
    pub mode: Option<FamiliesMode>,
    #[arg(long, default_value_t = 4)]
    pub n: u32,
    /// Family file (`n=<size>` then one hex mask per line); implies `check`.
    #[arg(long)]
    pub family: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Theorem2Args {
    /// Distribution file (`n=<size>` then `hexmask probability` lines).
    #[arg(long)]
    pub dist_file: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 8)]
    pub max_n: u32,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CounterexampleArgs {
    #[arg(long, default_value_t = 0.2)]
    pub ubar: f64,
    #[arg(long, default_value_t = 0.25)]
    pub u: f64,
    #[arg(long, default_value_t = 1.35)]
    pub d: f64,
    #[arg(long, default_value_t = 0.01)]
    pub theta: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub n: u64,
    /// Truncation K; defaults to ceil(30/−ln θ).
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Ground-set size of the exact cross-check; 0 skips it.
    #[arg(long, default_value_t = 10)]
    pub exact_n: u64,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingAction {
    /// Largest δ for which the improved inequality holds on the scanned class.
    DeltaSearch(DeltaArgs),
    /// Exact greedy coupling of two uniform samples of a family.
    Dp(DpArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DeltaArgs {
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.02)]
    pub delta_max: f64,
    #[arg(long, default_value_t = 1000)]
    pub delta_steps: usize,
    #[arg(long, default_value_t = 1000)]
    pub v_steps: usize,
    #[arg(long, default_value_t = 400)]
    pub mean_steps: usize,
    #[arg(long, default_value_t = 8)]
    pub local_points: usize,
    #[arg(long, default_value_t = 200)]
    pub atom_grid: usize,
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DpArgs {
    #[arg(long)]
    pub family: PathBuf,
    #[arg(long, value_enum, default_value_t = RateConvention::OwnPrefix)]
    pub convention: RateConvention,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct AllArgs {
    /// Smaller grids throughout.
    #[arg(long)]
    pub quick: bool,
}

/// Parses `argv` (program name first), runs the command and emits the report.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let report = match execute(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let text = match cli.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, text),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(text.as_bytes())
        }
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return 2;
    }
    for f in &report.failures {
        eprintln!("FAILED: {f}");
    }
    if report.passed {
        0
    } else {
        1
    }
}

/// Runs the parsed command on a pool of `--jobs` threads.
pub fn execute(cli: &Cli) -> Result<Report> {
    if let Some(tol) = cli.tol {
        if !(tol > 0.0) {
            return Err(Error::InvalidParams(format!("--tol must be positive, got {tol}")));
        }
    }
    if !(cli.lambda_scale > 0.0) {
        return Err(Error::InvalidParams("lambda scale must be positive".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::InvalidParams("--jobs must be positive".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let mut report = pool.install(|| dispatch(cli))?;
    if cli.timing {
        report.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    Ok(report)
}

fn dispatch(cli: &Cli) -> Result<Report> {
    match &cli.command {
        Command::Scalar(a) => scalar_report(cli, a),
        Command::Lemma(a) => lemma_report(cli, a),
        Command::Families(a) => families_report(cli, a),
        Command::Theorem2(a) => theorem2_report(cli, a),
        Command::Counterexample(a) => counterexample_cmd(cli, a),
        Command::Coupling { action: CouplingAction::DeltaSearch(a) } => delta_report(cli, a),
        Command::Coupling { action: CouplingAction::Dp(a) } => dp_report(cli, a),
        Command::All(a) => all_report(cli, a),
    }
}

fn read_file(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::InvalidParams(format!("cannot read {}: {e}", path.display())))
}

fn scalar_report(cli: &Cli, a: &ScalarArgs) -> Result<Report> {
    let suite = scalar_suite(a.grid, cli.tol.unwrap_or(IDENTITY_TOL))?;
    Ok(Report::new("scalar", cli, &suite, suite.failures.clone()))
}

fn lemma_report(cli: &Cli, a: &LemmaArgs) -> Result<Report> {
    let opts = LemmaOptions {
        u_steps: a.u_steps,
        v_steps: a.v_steps,
        atom_grid: a.atom_grid,
        local_points: a.local_points,
        restarts_per_point: a.restarts,
        seed: cli.seed,
        lambda_scale: cli.lambda_scale,
        scan_tol: cli.tol.unwrap_or(SCAN_TOL),
    };
    let cert = lemma_certificate(&opts)?;
    let sharp = sharpness_check(a.sharp_grid, SHARPNESS_TOL)?;
    let mut failures = Vec::new();
    if !cert.scan_ok {
        failures.push(format!("two-atom scan: slack {:e} at u = {}", cert.worst_slack, cert.worst_u));
    }
    if !cert.local_ok {
        failures.push(format!(
            "local search: best value {:e}, advantage over scan {:e}",
            cert.worst_local_value, cert.max_local_advantage
        ));
    }
    if !sharp.passed {
        failures.push(format!(
            "sharp measures: |value| up to {:e} / {:e}",
            sharp.max_dirac_value, sharp.max_two_atom_value
        ));
    }
    let table = Table {
        columns: ["u", "lambda", "scan_min_slack", "argmin_v", "local_best"].map(String::from).to_vec(),
        rows: cert
            .rows
            .iter()
            .map(|r| vec![json!(r.u), json!(r.lambda), json!(r.scan_min_slack), json!(r.argmin_v), json!(r.local_best)])
            .collect(),
    };
    Ok(Report::new("lemma", cli, &json!({ "certificate": cert, "sharpness": sharp }), failures).with_table(table))
}

fn families_report(cli: &Cli, a: &FamiliesArgs) -> Result<Report> {
    if let Some(path) = &a.family {
        let f = Family::parse(&read_file(path)?)?;
        let closed = is_union_closed(&f);
        let freq = max_element_frequency(&f);
        let diagnostics = if closed && f.n() <= MAX_DIAGNOSTICS_N {
            Some(entropy_chain_diagnostics(&f)?)
        } else {
            None
        };
        let mut failures = Vec::new();
        if !closed {
            failures.push("family is not union-closed".into());
        } else if !freq.degenerate && freq.best_proportion < GOLDEN_THRESHOLD {
            failures.push(format!("best proportion {} is below the golden threshold", freq.best_proportion));
        }
        let result = json!({ "family": f, "union_closed": closed, "frequency": freq, "diagnostics": diagnostics });
        return Ok(Report::new("families", cli, &result, failures));
    }
    if a.mode == Some(FamiliesMode::Check) {
        return Err(Error::InvalidParams("families check needs --family".into()));
    }
    let r = verify_theorem1(a.n)?;
    let failures = if r.holds {
        vec![]
    } else {
        vec![format!("minimum best proportion {} is below the golden threshold", r.min_best_proportion)]
    };
    Ok(Report::new("families", cli, &r, failures))
}

fn theorem2_report(cli: &Cli, a: &Theorem2Args) -> Result<Report> {
    let tol = cli.tol.unwrap_or(THEOREM2_TOL);
    if let Some(path) = &a.dist_file {
        let d = ExplicitSetDistribution::parse(&read_file(path)?)?;
        let r = verify_theorem2(&d)?;
        let failures = if r.slack >= -tol { vec![] } else { vec![format!("slack {:e}", r.slack)] };
        return Ok(Report::new("theorem2", cli, &r, failures));
    }
    let battery = theorem2_battery(a.count, a.max_n, cli.seed, tol)?;
    let asymptotics = example2_asymptotics(0.5, &[8, 10, 12])?;
    let mut failures = Vec::new();
    if battery.min_slack < -tol {
        failures.push(format!("random battery: slack {:e}", battery.min_slack));
    }
    if battery.max_equality_gap > tol {
        failures.push(format!("product distributions: equality gap {:e}", battery.max_equality_gap));
    }
    if asymptotics.fitted_constant > ASYMPTOTIC_CONSTANT {
        failures.push(format!("second sharp example: fitted constant {}", asymptotics.fitted_constant));
    }
    Ok(Report::new("theorem2", cli, &json!({ "battery": battery, "asymptotics": asymptotics }), failures))
}

fn counterexample_cmd(cli: &Cli, a: &CounterexampleArgs) -> Result<Report> {
    let mut params = CounterexampleParams::new(a.ubar, a.u, a.d, a.theta, a.n)?;
    if let Some(k) = a.k_max {
        params = params.with_truncation(k)?;
    }
    let main = counterexample_report(&params)?;
    let exact = if a.exact_n > 0 {
        Some(counterexample_report(&CounterexampleParams { n: a.exact_n, ..params.clone() })?)
    } else {
        None
    };
    let mut failures = Vec::new();
    if !main.admissible {
        failures.push(format!("marginal {} exceeds u = {}", main.marginal, params.u));
    }
    if !main.ratio_below_d {
        failures.push(format!("ratio bound {} is not below d = {}", main.ratio_bound, params.d));
    }
    if let Some(e) = exact.as_ref().and_then(|r| r.exact.as_ref()) {
        if !(e.h_a_within_bounds && e.h_union_within_bound && e.kl_within_bound) {
            failures.push(format!("exact values at n = {} fall outside the bounds", a.exact_n));
        }
    }
    let mut rows = Vec::new();
    let mut n = 10u64;
    while n <= params.n {
        let r = counterexample_report(&CounterexampleParams { n, ..params.clone() })?;
        rows.push(vec![json!(n), json!(r.entropy_lower_bound), json!(r.union_entropy_upper_bound), json!(r.ratio_bound), json!(r.kl_upper_bound)]);
        n *= 10;
    }
    let table = Table {
        columns: ["n", "entropy_lower_bound", "union_entropy_upper_bound", "ratio_bound", "kl_upper_bound"].map(String::from).to_vec(),
        rows,
    };
    let result = json!({
        "report": main,
        "exact_check": exact,
        "sweep": table,
        "note": "the k' law is the exact convolution of the truncated weights, (1-theta)^2 k' theta^(k'-1) before truncation",
    });
    Ok(Report::new("counterexample", cli, &result, failures).with_table(table))
}

fn delta_report(cli: &Cli, a: &DeltaArgs) -> Result<Report> {
    let opts = DeltaSearchOptions {
        alpha: a.alpha,
        delta_max: a.delta_max,
        delta_steps: a.delta_steps,
        v_steps: a.v_steps,
        mean_steps: a.mean_steps,
        local_points: a.local_points,
        atom_grid: a.atom_grid,
        restarts: a.restarts,
        seed: cli.seed,
    };
    let r = delta_search(&opts)?;
    let failures = match r.status {
        DeltaStatus::NoPositiveDelta => vec![format!(
            "no positive delta: violator with mean {} and normalized slack {:e}",
            r.binding.as_ref().map_or(f64::NAN, |b| b.mean),
            r.binding.as_ref().map_or(f64::NAN, |b| b.normalized_slack)
        )],
        _ => vec![],
    };
    let result = json!({ "search": r, "scope": "two-atom family and local-search minimizers only" });
    Ok(Report::new("coupling delta-search", cli, &result, failures))
}

fn dp_report(cli: &Cli, a: &DpArgs) -> Result<Report> {
    let f = Family::parse(&read_file(&a.family)?)?;
    let r = greedy_coupling_dp(&f, a.convention)?;
    let failures = if r.marginals_uniform {
        vec![]
    } else {
        vec![format!("marginals deviate from uniform by {:e} / {:e}", r.deviation_a, r.deviation_c)]
    };
    Ok(Report::new("coupling dp", cli, &r, failures))
}

fn all_report(cli: &Cli, a: &AllArgs) -> Result<Report> {
    let q = a.quick;
    let parts: Vec<Report> = vec![
        scalar_report(cli, &ScalarArgs { grid: if q { 10_000 } else { 100_000 } })?,
        lemma_report(
            cli,
            &LemmaArgs {
                mode: Some(LemmaMode::Certify),
                u_steps: if q { 100 } else { 1000 },
                v_steps: if q { 200 } else { 1000 },
                atom_grid: if q { 200 } else { 1000 },
                local_points: if q { 10 } else { 100 },
                restarts: if q { 4 } else { 10 },
                sharp_grid: 100,
            },
        )?,
        families_report(cli, &FamiliesArgs { mode: Some(FamiliesMode::Enumerate), n: if q { 3 } else { 4 }, family: None })?,
        theorem2_report(cli, &Theorem2Args { dist_file: None, count: if q { 100 } else { 1000 }, max_n: 8 })?,
        counterexample_cmd(
            cli,
            &CounterexampleArgs { ubar: 0.2, u: 0.25, d: 1.35, theta: 0.01, n: 1_000_000, k_max: None, exact_n: if q { 8 } else { 10 } },
        )?,
        delta_report(
            cli,
            &DeltaArgs {
                alpha: 0.05,
                delta_max: 0.02,
                delta_steps: if q { 200 } else { 1000 },
                v_steps: if q { 200 } else { 1000 },
                mean_steps: if q { 100 } else { 400 },
                local_points: if q { 2 } else { 8 },
                atom_grid: 200,
                restarts: if q { 2 } else { 4 },
            },
        )?,
    ];
    let failures = parts
        .iter()
        .flat_map(|p| p.failures.iter().map(move |f| format!("{}: {f}", p.command)))
        .collect();
    let result: serde_json::Map<String, serde_json::Value> = parts
        .into_iter()
        .map(|p| (p.command.clone(), json!({ "passed": p.passed, "result": p.result })))
        .collect();
    Ok(Report::new("all", cli, &result, failures))
}

//! Command-line front end: generate random models, solve them exactly, run
//! the min-plus approximate solvers, and drive full experiments.
//!
//! Exit codes: 0 success, 2 invalid input, 3 convergence or numeric
//! failure, 4 I/O failure.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use minplus_adp::adp::{aqi, vaqi};
use minplus_adp::experiment::{
    emit_outputs, random_mdp, random_test_matrix, run_experiment, ExperimentConfig,
    ExperimentReport, SolverKind, WSpec,
};
use minplus_adp::features::{build_full_basis, build_reward_bins, load_features, InfinityMode};
use minplus_adp::mdp::{greedy_from_q, Mdp};
use minplus_adp::minplus::MinPlusMatrix;
use minplus_adp::solve::{policy_evaluation_exact, q_value_iteration};
use minplus_adp::Error;

#[derive(Parser)]
#[command(
    name = "minplus-adp",
    version,
    about = "Exact and approximate dynamic programming on finite discounted MDPs,\n\
             with min-plus linear value-function approximation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random MDP and write it to a JSON file
    Gen(GenArgs),
    /// Solve an MDP exactly and report optimal values and a greedy policy
    Solve(SolveArgs),
    /// Approximate the optimal Q-function by projected Q iteration
    Approx(ApproxArgs),
    /// Run a full randomized study and emit its report and plot data
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Number of states
    #[arg(long)]
    n: usize,
    /// Number of actions
    #[arg(long)]
    d: usize,
    /// Discount factor in [0, 1)
    #[arg(long)]
    alpha: f64,
    /// Seed of the pseudorandom stream
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Inclusive integer range rewards are drawn from
    #[arg(long, value_name = "LO:HI", default_value = "1:10")]
    reward_range: RangeArg,
    /// Output file for the model (JSON)
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Model file (JSON, as written by `gen`)
    #[arg(long, value_name = "FILE")]
    mdp: PathBuf,
    /// Stopping tolerance
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Iteration cap
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    /// Directory for Q_star.json, J_star.dat, J_policy.dat, policy.csv
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ApproxArgs {
    /// Model file (JSON, as written by `gen`)
    #[arg(long, value_name = "FILE")]
    mdp: PathBuf,
    /// Feature matrix: `bins:K` reward bins, `full` identity basis, or `file:PATH`
    #[arg(long, value_name = "SPEC", default_value = "bins:5")]
    features: FeatureSpec,
    /// Test matrix for the variational projection: `identity`, `features`,
    /// `random`, or `random:M`; omit to use the exact projection
    #[arg(long, value_name = "SPEC")]
    w: Option<WArg>,
    /// Density of finite entries in a random test matrix
    #[arg(long, default_value_t = 0.2)]
    density: f64,
    /// Seed for a random test matrix
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Representation of non-membership: `exact` (+inf) or `sentinel:VALUE`
    #[arg(long, value_name = "MODE", default_value = "exact")]
    inf: InfArg,
    /// Stopping tolerance
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Iteration cap
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    /// Write per-sweep residuals to a CSV file
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Directory for result.json, J_tilde.dat, policy.csv
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Full experiment config as a JSON file, replacing the model flags
    #[arg(
        long,
        value_name = "FILE",
        conflicts_with_all = [
            "n", "d", "alpha", "k", "seed", "reward_range", "solvers", "w",
            "density", "inf", "tol", "max_iter",
        ]
    )]
    config: Option<PathBuf>,
    /// Number of states
    #[arg(long, required_unless_present = "config")]
    n: Option<usize>,
    /// Number of actions
    #[arg(long, required_unless_present = "config")]
    d: Option<usize>,
    /// Discount factor in [0, 1)
    #[arg(long, required_unless_present = "config")]
    alpha: Option<f64>,
    /// Number of reward bins for the feature matrix
    #[arg(long, required_unless_present = "config")]
    k: Option<usize>,
    /// Seed of the pseudorandom stream
    #[arg(long, required_unless_present = "config")]
    seed: Option<u64>,
    /// Inclusive integer range rewards are drawn from
    #[arg(long, value_name = "LO:HI", default_value = "1:10")]
    reward_range: RangeArg,
    /// Comma-separated solvers to run: exact,aqi,vaqi,ape,api
    #[arg(long, value_delimiter = ',', value_parser = parse_solver)]
    solvers: Option<Vec<SolverKind>>,
    /// Test matrix: `identity`, `features`, `random`, or `random:M`
    #[arg(long, value_name = "SPEC", default_value = "random")]
    w: WArg,
    /// Density of finite entries in a random test matrix
    #[arg(long, default_value_t = 0.2)]
    density: f64,
    /// Representation of non-membership: `exact` (+inf) or `sentinel:VALUE`
    #[arg(long, value_name = "MODE", default_value = "exact")]
    inf: InfArg,
    /// Stopping tolerance
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Iteration cap
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    /// Output directory for report.json and plot data
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Clone, Debug)]
struct RangeArg(i64, i64);

impl FromStr for RangeArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| format!("expected `LO:HI`, got `{s}`"))?;
        let lo = lo.trim().parse().map_err(|_| format!("invalid lower bound `{lo}`"))?;
        let hi = hi.trim().parse().map_err(|_| format!("invalid upper bound `{hi}`"))?;
        Ok(RangeArg(lo, hi))
    }
}

#[derive(Clone, Debug)]
enum FeatureSpec {
    Bins(usize),
    Full,
    File(PathBuf),
}

impl FromStr for FeatureSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "full" {
            return Ok(FeatureSpec::Full);
        }
        if let Some(rest) = s.strip_prefix("bins:") {
            return rest
                .parse()
                .map(FeatureSpec::Bins)
                .map_err(|_| format!("invalid bin count `{rest}`"));
        }
        if let Some(rest) = s.strip_prefix("file:") {
            return Ok(FeatureSpec::File(PathBuf::from(rest)));
        }
        Err(format!("expected `bins:K`, `full`, or `file:PATH`, got `{s}`"))
    }
}

#[derive(Clone, Debug)]
enum WArg {
    Identity,
    Features,
    Random(Option<usize>),
}

impl FromStr for WArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" => Ok(WArg::Identity),
            "features" => Ok(WArg::Features),
            "random" => Ok(WArg::Random(None)),
            _ => {
                if let Some(rest) = s.strip_prefix("random:") {
                    rest.parse()
                        .map(|m| WArg::Random(Some(m)))
                        .map_err(|_| format!("invalid column count `{rest}`"))
                } else {
                    Err(format!(
                        "expected `identity`, `features`, `random`, or `random:M`, got `{s}`"
                    ))
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
struct InfArg(InfinityMode);

impl FromStr for InfArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "exact" {
            return Ok(InfArg(InfinityMode::Exact));
        }
        if let Some(rest) = s.strip_prefix("sentinel:") {
            let value: f64 =
                rest.parse().map_err(|_| format!("invalid sentinel value `{rest}`"))?;
            return Ok(InfArg(InfinityMode::Sentinel(value)));
        }
        Err(format!("expected `exact` or `sentinel:VALUE`, got `{s}`"))
    }
}

fn parse_solver(s: &str) -> Result<SolverKind, String> {
    match s {
        "exact" => Ok(SolverKind::Exact),
        "aqi" => Ok(SolverKind::Aqi),
        "vaqi" => Ok(SolverKind::Vaqi),
        "ape" => Ok(SolverKind::Ape),
        "api" => Ok(SolverKind::Api),
        _ => Err(format!("unknown solver `{s}` (expected exact, aqi, vaqi, ape, or api)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 4,
        Error::Convergence(_) | Error::Numeric(_) | Error::Invariant(_) => 3,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Gen(args) => run_gen(args),
        Command::Solve(args) => run_solve(args),
        Command::Approx(args) => run_approx(args),
        Command::Experiment(args) => run_experiment_cmd(args),
    }
}

fn run_gen(args: GenArgs) -> Result<(), Error> {
    let range = (args.reward_range.0, args.reward_range.1);
    let mdp = random_mdp(args.n, args.d, range, args.alpha, args.seed)?;
    mdp.save(&args.out)?;
    println!(
        "wrote a random MDP (n={}, d={}, alpha={}, rewards {}..={}, seed {}) to {}",
        args.n,
        args.d,
        args.alpha,
        range.0,
        range.1,
        args.seed,
        args.out.display()
    );
    Ok(())
}

fn run_solve(args: SolveArgs) -> Result<(), Error> {
    let mdp = Mdp::load(&args.mdp)?;
    let q_star = q_value_iteration(&mdp, args.tol, args.max_iter)?;
    let j_star = q_star.row_max();
    let policy = greedy_from_q(&q_star);
    let j_policy = policy_evaluation_exact(&mdp, &policy)?;
    let certificate = sup_diff(j_star.as_slice(), j_policy.as_slice());

    println!("model: n={}, d={}, alpha={}", mdp.n(), mdp.d(), mdp.alpha());
    let (lo, hi) = value_span(j_star.as_slice());
    println!("optimal values: min {lo:.6}, max {hi:.6}");
    println!("the greedy policy evaluates within {certificate:.3e} of those values");
    print_states(j_star.as_slice(), &policy.0);

    if let Some(dir) = &args.out {
        create_dir(dir)?;
        write_json(&dir.join("Q_star.json"), &q_star)?;
        write_dat(&dir.join("J_star.dat"), j_star.as_slice())?;
        write_dat(&dir.join("J_policy.dat"), j_policy.as_slice())?;
        write_policy_csv(&dir.join("policy.csv"), &policy.0)?;
        println!(
            "wrote Q_star.json, J_star.dat, J_policy.dat, policy.csv to {}",
            dir.display()
        );
    }
    Ok(())
}

fn run_approx(args: ApproxArgs) -> Result<(), Error> {
    let mdp = Mdp::load(&args.mdp)?;
    let rows = mdp.n() * mdp.d();
    let exact_basis = match &args.features {
        FeatureSpec::Bins(k) => build_reward_bins(&mdp, *k)?,
        FeatureSpec::Full => build_full_basis(rows)?,
        FeatureSpec::File(path) => load_features(path)?,
    };
    let basis = args.inf.0.apply(&exact_basis)?;

    let result = match &args.w {
        None => {
            println!(
                "exact-projection Q iteration, {} basis functions",
                basis.num_functions()
            );
            aqi(&mdp, &basis, args.tol, args.max_iter)?
        }
        Some(spec) => {
            let w_exact = match spec {
                WArg::Identity => MinPlusMatrix::identity(rows),
                WArg::Features => basis.matrix().clone(),
                WArg::Random(m) => {
                    let m = m.unwrap_or((rows / 5).max(1));
                    random_test_matrix(rows, m, args.density, args.seed)?
                }
            };
            let w = match args.inf.0 {
                InfinityMode::Exact => w_exact,
                InfinityMode::Sentinel(v) => w_exact.with_infinity_as(v)?,
            };
            println!(
                "variational Q iteration, {} basis functions against {} test vectors",
                basis.num_functions(),
                w.cols()
            );
            vaqi(&mdp, &basis, &w, args.tol, args.max_iter)?
        }
    };

    println!(
        "converged in {} sweeps, final residual {:.3e}, projection gap {:.3e}",
        result.iterations, result.final_residual, result.projection_gap
    );
    let j_tilde = result.q_approx.row_max();
    let policy = greedy_from_q(&result.q_approx);
    let (lo, hi) = value_span(j_tilde.as_slice());
    println!("approximate values: min {lo:.6}, max {hi:.6}");
    print_states(j_tilde.as_slice(), &policy.0);

    if let Some(path) = &args.trace {
        write_trace(path, &result.residuals)?;
        println!("wrote the residual trace to {}", path.display());
    }
    if let Some(dir) = &args.out {
        create_dir(dir)?;
        write_json(&dir.join("result.json"), &result)?;
        write_dat(&dir.join("J_tilde.dat"), j_tilde.as_slice())?;
        write_policy_csv(&dir.join("policy.csv"), &policy.0)?;
        println!("wrote result.json, J_tilde.dat, policy.csv to {}", dir.display());
    }
    Ok(())
}

fn run_experiment_cmd(args: ExperimentArgs) -> Result<(), Error> {
    let config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig {
            n: args.n.unwrap(),
            d: args.d.unwrap(),
            alpha: args.alpha.unwrap(),
            k: args.k.unwrap(),
            seed: args.seed.unwrap(),
            reward_range: (args.reward_range.0, args.reward_range.1),
            solvers: args.solvers.clone().unwrap_or_else(|| {
                vec![SolverKind::Exact, SolverKind::Aqi, SolverKind::Vaqi]
            }),
            w: match args.w {
                WArg::Identity => WSpec::Identity,
                WArg::Features => WSpec::Features,
                WArg::Random(m) => WSpec::RandomBinary { m, density: args.density },
            },
            infinity: args.inf.0,
            tol: args.tol,
            max_iter: args.max_iter,
        },
    };
    let report = run_experiment(&config)?;
    print_report_summary(&report);
    let files = emit_outputs(&report, &args.out)?;
    println!("wrote {} files to {}", files.len(), args.out.display());
    Ok(())
}

fn print_report_summary(report: &ExperimentReport) {
    let c = &report.config;
    println!(
        "experiment: n={}, d={}, alpha={}, k={}, seed={}",
        c.n, c.d, c.alpha, c.k, c.seed
    );
    println!("{:>28} {:>12}", "quantity", "sup error");
    println!(
        "{:>28} {:>12.4}",
        "arbitrary policy", report.sup_errors.arbitrary_policy
    );
    if let Some(section) = &report.exact_projection {
        println!("{:>28} {:>12.4}", "exact-projection value", section.sup_error_value);
        println!("{:>28} {:>12.4}", "exact-projection policy", section.sup_error_policy);
        println!(
            "{:>28} {:>12.4}   (epsilon {:.4}, beta {:.4})",
            "a-priori bound", section.bound.bound, section.bound.epsilon, section.bound.beta
        );
    }
    if let Some(section) = &report.variational {
        println!("{:>28} {:>12.4}", "variational value", section.sup_error_value);
        println!("{:>28} {:>12.4}", "variational policy", section.sup_error_policy);
    }
    if let Some(section) = &report.conventional {
        if let Some(ape) = &section.ape {
            println!(
                "{:>28} {:>12.4}",
                "least-squares evaluation", ape.sup_error_vs_exact
            );
        }
        if let Some(api) = &section.api {
            println!("{:>28} {:>12}", "policy iteration chattered", api.chattering);
        }
    }
    let r = &report.runtimes_seconds;
    println!("runtimes: exact {:.3}s, total {:.3}s", r.exact, r.total);
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn value_span(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(*v), hi.max(*v))
    })
}

/// Per-state listing, printed only for small models.
fn print_states(values: &[f64], actions: &[usize]) {
    if values.len() > 20 {
        return;
    }
    println!("{:>6} {:>14} {:>7}", "state", "value", "action");
    for (s, (v, a)) in values.iter().zip(actions).enumerate() {
        println!("{:>6} {:>14.6} {:>7}", s + 1, v, a);
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    text.push(b'\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Two-column plot data: 1-based state index and value.
fn write_dat(path: &Path, values: &[f64]) -> Result<(), Error> {
    let mut text = String::new();
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(text, "{} {:.10}", i + 1, v);
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_policy_csv(path: &Path, actions: &[usize]) -> Result<(), Error> {
    let mut text = String::from("state,action\n");
    for (s, a) in actions.iter().enumerate() {
        let _ = writeln!(text, "{},{}", s + 1, a);
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_trace(path: &Path, residuals: &[f64]) -> Result<(), Error> {
    let mut text = String::from("sweep,residual\n");
    for (i, r) in residuals.iter().enumerate() {
        let _ = writeln!(text, "{},{:.12e}", i + 1, r);
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

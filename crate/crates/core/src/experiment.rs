//! Random-model experiment harness: generate a discounted model from a
//! seed, solve it exactly, approximately (min-plus projected Q-iteration,
//! exact and variational), and optionally with the least-squares baseline,
//! then write a machine-readable report.
//!
//! Everything is driven by one seeded pseudorandom stream, so a
//! configuration determines every byte of the report except the recorded
//! runtimes. The draw order is part of the contract: rewards (state-major),
//! then transition kernels (action-major), then the arbitrary baseline
//! policy, then the random test matrix if one is requested.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adp::{aqi, best_sup_norm_weights, error_bound_report, vaqi, ErrorBoundReport};
use crate::conventional::{ape, api, LsBasis};
use crate::error::{Error, Result};
use crate::features::{build_reward_bins, InfinityMode};
use crate::mdp::{Mdp, Policy, QFunction};
use crate::minplus::{MinPlusMatrix, SpanBasis};
use crate::solve::{policy_evaluation_exact, q_value_iteration};
use crate::util::{sup_diff, write_atomic};

/// Which solvers an experiment runs. The exact solver always runs — its
/// Q-function is the reference everything is measured against — so listing
/// it is informative only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Exact,
    Aqi,
    Vaqi,
    Ape,
    Api,
}

/// Test-matrix choice for the variational projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WSpec {
    /// The min-plus identity: the variational projection coincides with
    /// the exact one.
    Identity,
    /// Use the feature matrix itself as the test matrix.
    Features,
    /// A random binary matrix: each entry is 0 with probability `density`
    /// and +∞ otherwise; a column that comes out all +∞ gets one random 0
    /// so every test vector is usable. `m` defaults to max(1, n·d/5).
    RandomBinary { m: Option<usize>, density: f64 },
}

impl Default for WSpec {
    fn default() -> Self {
        WSpec::RandomBinary { m: None, density: 0.2 }
    }
}

fn default_reward_range() -> (i64, i64) {
    (1, 10)
}

fn default_solvers() -> Vec<SolverKind> {
    vec![SolverKind::Exact, SolverKind::Aqi, SolverKind::Vaqi]
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    100_000
}

/// Full description of one experiment; serializable, and embedded verbatim
/// in the report it produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Number of states.
    pub n: usize,
    /// Number of actions.
    pub d: usize,
    /// Discount factor in [0, 1).
    pub alpha: f64,
    /// Number of reward bins for the min-plus feature matrix.
    pub k: usize,
    /// Seed of the pseudorandom stream.
    pub seed: u64,
    /// Inclusive integer range rewards are drawn from.
    #[serde(default = "default_reward_range")]
    pub reward_range: (i64, i64),
    /// Solvers to run (the exact solver always runs).
    #[serde(default = "default_solvers")]
    pub solvers: Vec<SolverKind>,
    /// Test matrix for the variational runs.
    #[serde(default)]
    pub w: WSpec,
    /// Representation of non-membership in the feature matrix.
    #[serde(default)]
    pub infinity: InfinityMode,
    /// Stopping tolerance handed to every iterative solver.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Sweep cap handed to every iterative solver.
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl ExperimentConfig {
    /// Read a config from a JSON file; absent optional fields take their
    /// defaults.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.k == 0 {
            return Err(Error::Invalid("n, d, and k must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Invalid(format!(
                "discount factor must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        if self.reward_range.0 > self.reward_range.1 {
            return Err(Error::Invalid(format!(
                "reward range ({}, {}) is empty",
                self.reward_range.0, self.reward_range.1
            )));
        }
        if let WSpec::RandomBinary { m, density } = &self.w {
            if let Some(m) = m {
                if *m == 0 {
                    return Err(Error::Invalid("test matrix must have at least 1 column".into()));
                }
            }
            if !(*density > 0.0 && *density <= 1.0) {
                return Err(Error::Invalid(format!(
                    "test-matrix density must lie in (0, 1], got {density}"
                )));
            }
        }
        Ok(())
    }
}

/// Draw a random model: integer rewards uniform on the inclusive range
/// (state-major), then one transition kernel per action (action-major),
/// each row built from strictly positive uniform draws and normalized.
pub(crate) fn random_mdp_from_rng(
    rng: &mut ChaCha8Rng,
    n: usize,
    d: usize,
    reward_range: (i64, i64),
    alpha: f64,
) -> Result<Mdp> {
    let reward_dist = Uniform::new_inclusive(reward_range.0, reward_range.1);
    let rewards: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| reward_dist.sample(rng) as f64).collect())
        .collect();
    let mut transitions = Vec::with_capacity(d);
    for _ in 0..d {
        let mut kernel = Vec::with_capacity(n);
        for _ in 0..n {
            // 1 − u is in (0, 1], so no state is unreachable and every
            // chain is irreducible and aperiodic.
            let row: Vec<f64> = (0..n).map(|_| 1.0 - rng.gen::<f64>()).collect();
            let total: f64 = row.iter().sum();
            kernel.push(row.into_iter().map(|x| x / total).collect());
        }
        transitions.push(kernel);
    }
    Mdp::new(rewards, transitions, alpha)
}

/// Seeded convenience wrapper around [`random_mdp_from_rng`].
pub fn random_mdp(
    n: usize,
    d: usize,
    reward_range: (i64, i64),
    alpha: f64,
    seed: u64,
) -> Result<Mdp> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_mdp_from_rng(&mut rng, n, d, reward_range, alpha)
}

fn random_policy_from_rng(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Policy {
    Policy((0..n).map(|_| rng.gen_range(0..d)).collect())
}

/// Seeded random binary test matrix with `m` columns over `rows`
/// coordinates: each entry is finite (0) with probability `density`, and a
/// column that comes out all-infinite gets one finite entry at a random row.
pub fn random_test_matrix(rows: usize, m: usize, density: f64, seed: u64) -> Result<MinPlusMatrix> {
    if rows == 0 || m == 0 {
        return Err(Error::Invalid("test matrix must have at least one row and column".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Invalid(format!(
            "test-matrix density must lie in (0, 1], got {density}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_binary_w_from_rng(&mut rng, rows, m, density)
}

/// Random binary test matrix, drawn column-major; see
/// [`WSpec::RandomBinary`].
fn random_binary_w_from_rng(
    rng: &mut ChaCha8Rng,
    rows: usize,
    m: usize,
    density: f64,
) -> Result<MinPlusMatrix> {
    let mut columns = vec![vec![f64::INFINITY; rows]; m];
    for col in &mut columns {
        for entry in col.iter_mut() {
            if rng.gen::<f64>() < density {
                *entry = 0.0;
            }
        }
        if col.iter().all(|x| *x == f64::INFINITY) {
            let i = rng.gen_range(0..rows);
            col[i] = 0.0;
        }
    }
    let mut data = Vec::with_capacity(rows * m);
    for i in 0..rows {
        for col in &columns {
            data.push(col[i]);
        }
    }
    MinPlusMatrix::new(rows, m, data)
}

/// Results of one min-plus projected-Q-iteration solver (exact or
/// variational projection).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionSection {
    /// Fixed-point weights of the approximation Φ ⊗ r̃.
    #[serde(with = "crate::minplus::json_vec")]
    pub weights: Vec<f64>,
    /// State values of the approximation, J̃(s) = max_a (Φ ⊗ r̃)(s, a).
    pub j_tilde: Vec<f64>,
    /// Greedy policy of the approximation.
    pub policy: Vec<usize>,
    /// Exact value of that greedy policy.
    pub j_policy: Vec<f64>,
    /// Projected Bellman sweeps performed.
    pub iterations: usize,
    /// Sup-norm distance between the last two iterates.
    pub final_residual: f64,
    /// ‖J̃ − J*‖∞.
    pub sup_error_value: f64,
    /// ‖J_policy − J*‖∞.
    pub sup_error_policy: f64,
    /// The a-priori guarantee and the Q-level error measured against it.
    pub bound: ErrorBoundReport,
}

/// Results of the least-squares baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConventionalSection {
    /// Columns of the state-aggregation basis after dropping empty groups.
    pub basis_functions: usize,
    pub ape: Option<ApeSummary>,
    pub api: Option<ApiSummary>,
}

/// Approximate evaluation of the arbitrary baseline policy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApeSummary {
    pub weights: Vec<f64>,
    pub value: Vec<f64>,
    pub iterations: usize,
    pub final_residual: f64,
    /// ‖Φr* − J_u‖∞ against the exact value of the same policy.
    pub sup_error_vs_exact: f64,
}

/// Approximate policy iteration trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApiSummary {
    pub policies: Vec<Vec<usize>>,
    pub chattering: bool,
    pub improvements: usize,
}

/// Sup-norm distances to J*, collected for quick reading.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SupErrors {
    pub arbitrary_policy: f64,
    pub exact_projection_value: Option<f64>,
    pub exact_projection_policy: Option<f64>,
    pub variational_value: Option<f64>,
    pub variational_policy: Option<f64>,
}

/// Wall-clock seconds per phase. The only part of a report that is not a
/// pure function of the configuration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Runtimes {
    pub exact: f64,
    pub exact_projection: Option<f64>,
    pub variational: Option<f64>,
    pub conventional: Option<f64>,
    pub total: f64,
}

/// Everything one experiment produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// Optimal values J*(s) = max_a Q*(s, a).
    pub j_star: Vec<f64>,
    /// The arbitrary baseline policy and its exact value.
    pub u_arbt: Vec<usize>,
    pub j_u_arbt: Vec<f64>,
    /// Exact-projection solver results.
    pub exact_projection: Option<ProjectionSection>,
    /// Variational-projection solver results.
    pub variational: Option<ProjectionSection>,
    /// Least-squares baseline results.
    pub conventional: Option<ConventionalSection>,
    pub sup_errors: SupErrors,
    pub runtimes_seconds: Runtimes,
}

impl ExperimentReport {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_vec_pretty(self)
            .map_err(|e| Error::parse(path, e.to_string()))?;
        text.push(b'\n');
        write_atomic(path, &text)
    }
}

fn build_w(
    rng: &mut ChaCha8Rng,
    spec: &WSpec,
    basis: &SpanBasis,
    rows: usize,
) -> Result<MinPlusMatrix> {
    match spec {
        WSpec::Identity => Ok(MinPlusMatrix::identity(rows)),
        WSpec::Features => Ok(basis.matrix().clone()),
        WSpec::RandomBinary { m, density } => {
            let m = m.unwrap_or_else(|| (rows / 5).max(1));
            random_binary_w_from_rng(rng, rows, m, *density)
        }
    }
}

fn solver_section(
    mdp: &Mdp,
    q_star: &QFunction,
    j_star: &[f64],
    epsilon: f64,
    result: crate::adp::AqiResult,
) -> Result<ProjectionSection> {
    let j_tilde = result.q_approx.row_max();
    let (policy, j_policy) = crate::adp::greedy_and_evaluate(mdp, &result.q_approx)?;
    let measured = sup_diff(result.q_approx.values(), q_star.values());
    let bound = error_bound_report(mdp.alpha(), epsilon, result.projection_gap, measured)?;
    let sup_error_value = sup_diff(j_tilde.as_slice(), j_star);
    let sup_error_policy = sup_diff(j_policy.as_slice(), j_star);
    Ok(ProjectionSection {
        weights: result.weights,
        j_tilde: j_tilde.0,
        policy: policy.0,
        j_policy: j_policy.0,
        iterations: result.iterations,
        final_residual: result.final_residual,
        sup_error_value,
        sup_error_policy,
        bound,
    })
}

/// State-aggregation basis for the least-squares baseline: states are
/// grouped by binning v(s) = max_a g_a(s) into k half-open intervals (the
/// last one closed) and each nonempty group contributes an indicator
/// column. Unlike the min-plus bins, the groups partition the states —
/// overlapping indicators could be collinear, and the least-squares
/// machinery needs full column rank.
fn aggregation_basis(mdp: &Mdp, k: usize) -> Result<LsBasis> {
    let v: Vec<f64> = (0..mdp.n())
        .map(|s| (0..mdp.d()).map(|a| mdp.reward(s, a)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    let group = |x: f64| -> usize {
        if width == 0.0 {
            0
        } else {
            (((x - lo) / width * k as f64).floor() as usize).min(k - 1)
        }
    };
    let mut used: Vec<usize> = v.iter().map(|&x| group(x)).collect();
    let mut labels: Vec<usize> = used.clone();
    labels.sort_unstable();
    labels.dedup();
    for g in &mut used {
        *g = labels.binary_search(g).expect("label comes from the same list");
    }
    let rows: Vec<Vec<f64>> = used
        .iter()
        .map(|&g| {
            let mut row = vec![0.0; labels.len()];
            row[g] = 1.0;
            row
        })
        .collect();
    LsBasis::from_rows(rows)
}

/// Run one experiment end to end. The exact solver always runs; the
/// min-plus and least-squares solvers run when listed in
/// `config.solvers`. Fails if any requested solver fails.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let t_total = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mdp = random_mdp_from_rng(&mut rng, config.n, config.d, config.reward_range, config.alpha)?;
    let u_arbt = random_policy_from_rng(&mut rng, config.n, config.d);

    let want = |kind: SolverKind| config.solvers.contains(&kind);

    let exact_bins = build_reward_bins(&mdp, config.k)?;
    let basis = config.infinity.apply(&exact_bins)?;

    let t_exact = Instant::now();
    let q_star = q_value_iteration(&mdp, config.tol, config.max_iter)?;
    let j_star = q_star.row_max();
    let exact_seconds = t_exact.elapsed().as_secs_f64();

    let j_u_arbt = policy_evaluation_exact(&mdp, &u_arbt)?;

    // Best sup-norm approximation error of Q* inside the span — the ε both
    // bounds charge for the architecture.
    let epsilon = if want(SolverKind::Aqi) || want(SolverKind::Vaqi) {
        best_sup_norm_weights(&basis, q_star.values())?.1
    } else {
        0.0
    };

    let mut runtimes = Runtimes { exact: exact_seconds, ..Runtimes::default() };

    let exact_projection = if want(SolverKind::Aqi) {
        let t = Instant::now();
        let result = aqi(&mdp, &basis, config.tol, config.max_iter)?;
        let section =
            solver_section(&mdp, &q_star, j_star.as_slice(), epsilon, result)?;
        runtimes.exact_projection = Some(t.elapsed().as_secs_f64());
        Some(section)
    } else {
        None
    };

    let variational = if want(SolverKind::Vaqi) {
        let t = Instant::now();
        let w_exact = build_w(&mut rng, &config.w, &basis, mdp.n() * mdp.d())?;
        let w = match config.infinity {
            InfinityMode::Exact => w_exact,
            InfinityMode::Sentinel(v) => w_exact.with_infinity_as(v)?,
        };
        let result = match vaqi(&mdp, &basis, &w, config.tol, config.max_iter) {
            Err(Error::ProjectionUndefined { row }) => {
                return Err(Error::Invalid(format!(
                    "the variational projection leaves state-action pair {row} uncovered: \
                     no test vector sees the basis functions that cover it; widen the test \
                     matrix (more columns or higher density) or use a finite sentinel"
                )))
            }
            other => other?,
        };
        let section =
            solver_section(&mdp, &q_star, j_star.as_slice(), epsilon, result)?;
        runtimes.variational = Some(t.elapsed().as_secs_f64());
        Some(section)
    } else {
        None
    };

    let conventional = if want(SolverKind::Ape) || want(SolverKind::Api) {
        let t = Instant::now();
        let ls_basis = aggregation_basis(&mdp, config.k)?;
        let ape_summary = if want(SolverKind::Ape) {
            let result = ape(&mdp, &u_arbt, &ls_basis, config.tol, config.max_iter)?;
            let sup_error =
                sup_diff(result.value_approx.as_slice(), j_u_arbt.as_slice());
            Some(ApeSummary {
                weights: result.weights,
                value: result.value_approx.0,
                iterations: result.iterations,
                final_residual: result.final_residual,
                sup_error_vs_exact: sup_error,
            })
        } else {
            None
        };
        let api_summary = if want(SolverKind::Api) {
            let result = api(&mdp, &ls_basis, config.tol, 10 * mdp.n() + 10, config.max_iter)?;
            Some(ApiSummary {
                policies: result.policies.iter().map(|p| p.0.clone()).collect(),
                chattering: result.chattering,
                improvements: result.log.len(),
            })
        } else {
            None
        };
        let section = ConventionalSection {
            basis_functions: ls_basis.num_functions(),
            ape: ape_summary,
            api: api_summary,
        };
        runtimes.conventional = Some(t.elapsed().as_secs_f64());
        Some(section)
    } else {
        None
    };

    let sup_errors = SupErrors {
        arbitrary_policy: sup_diff(j_u_arbt.as_slice(), j_star.as_slice()),
        exact_projection_value: exact_projection.as_ref().map(|s| s.sup_error_value),
        exact_projection_policy: exact_projection.as_ref().map(|s| s.sup_error_policy),
        variational_value: variational.as_ref().map(|s| s.sup_error_value),
        variational_policy: variational.as_ref().map(|s| s.sup_error_policy),
    };
    runtimes.total = t_total.elapsed().as_secs_f64();

    Ok(ExperimentReport {
        config: config.clone(),
        j_star: j_star.0,
        u_arbt: u_arbt.0,
        j_u_arbt: j_u_arbt.0,
        exact_projection,
        variational,
        conventional,
        sup_errors,
        runtimes_seconds: runtimes,
    })
}

fn write_dat(dir: &Path, name: &str, values: &[f64], written: &mut Vec<PathBuf>) -> Result<()> {
    let mut text = String::new();
    for (i, v) in values.iter().enumerate() {
        text.push_str(&format!("{} {:.10}\n", i + 1, v));
    }
    let path = dir.join(name);
    write_atomic(&path, text.as_bytes())?;
    written.push(path);
    Ok(())
}

/// Write the report and its plottable companions into `dir` (created if
/// missing): `report.json`, one two-column `.dat` file per value vector
/// (1-based state index, value), `errors.csv`, and `api_policies.csv` when
/// approximate policy iteration ran. Returns the written paths.
pub fn emit_outputs(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let report_path = dir.join("report.json");
    report.save(&report_path)?;
    written.push(report_path);

    write_dat(dir, "J_star.dat", &report.j_star, &mut written)?;
    write_dat(dir, "J_u_arbt.dat", &report.j_u_arbt, &mut written)?;
    if let Some(section) = &report.exact_projection {
        write_dat(dir, "J_tilde_EP.dat", &section.j_tilde, &mut written)?;
        write_dat(dir, "J_u_EP.dat", &section.j_policy, &mut written)?;
    }
    if let Some(section) = &report.variational {
        write_dat(dir, "J_tilde_W.dat", &section.j_tilde, &mut written)?;
        write_dat(dir, "J_u_W.dat", &section.j_policy, &mut written)?;
    }

    let mut csv = String::from("quantity,sup_error\n");
    csv.push_str(&format!("j_u_arbt,{:.12e}\n", report.sup_errors.arbitrary_policy));
    let rows = [
        ("j_tilde_ep", report.sup_errors.exact_projection_value),
        ("j_u_ep", report.sup_errors.exact_projection_policy),
        ("j_tilde_w", report.sup_errors.variational_value),
        ("j_u_w", report.sup_errors.variational_policy),
    ];
    for (name, value) in rows {
        if let Some(v) = value {
            csv.push_str(&format!("{name},{v:.12e}\n"));
        }
    }
    let csv_path = dir.join("errors.csv");
    write_atomic(&csv_path, csv.as_bytes())?;
    written.push(csv_path);

    if let Some(api_summary) = report.conventional.as_ref().and_then(|c| c.api.as_ref()) {
        let mut text = String::from("iteration");
        for s in 0..report.config.n {
            text.push_str(&format!(",s{}", s + 1));
        }
        text.push('\n');
        for (i, policy) in api_summary.policies.iter().enumerate() {
            text.push_str(&i.to_string());
            for a in policy {
                text.push_str(&format!(",{a}"));
            }
            text.push('\n');
        }
        let path = dir.join("api_policies.csv");
        write_atomic(&path, text.as_bytes())?;
        written.push(path);
    }

    Ok(written)
}

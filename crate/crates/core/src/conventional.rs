//! The conventional least-squares counterpart: linear value-function
//! approximation with a weighted Euclidean projection, approximate policy
//! evaluation (projected value iteration), and approximate policy
//! iteration with chattering detection.
//!
//! Here the architecture is an ordinary linear span Φr over the states and
//! the projection Π_D is orthogonal with respect to a strictly positive
//! state distribution D. With D the stationary distribution of the policy
//! being evaluated, Π_D T_u is an α-contraction in the D-weighted norm and
//! the fixed point Φr* satisfies
//! ‖J_u − Φr*‖_D ≤ ‖J_u − Π_D J_u‖_D / √(1 − α²).
//! Unlike the min-plus projection, Π_D is not sup-norm nonexpansive, and
//! policy iteration on top of it can cycle between policies forever —
//! both phenomena are pinned down in the tests.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{greedy_policy, Mdp, Policy, ValueFunction};
use crate::solve::{check_iteration_params, stationary_distribution};

/// A real feature matrix over states with full column rank, the
/// architecture of the least-squares methods.
#[derive(Debug, Clone, PartialEq)]
pub struct LsBasis {
    matrix: DMatrix<f64>,
}

impl LsBasis {
    /// Validate shape, finiteness, and full column rank (smallest singular
    /// value above 1e-10 times the largest).
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::Invalid("feature matrix must be nonempty".into()));
        }
        if matrix.ncols() > matrix.nrows() {
            return Err(Error::RankDeficient(format!(
                "{} basis functions over {} states cannot be independent",
                matrix.ncols(),
                matrix.nrows()
            )));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::Invalid("feature matrix entries must be finite".into()));
        }
        let svals = matrix.clone().singular_values();
        let s_max = svals.max();
        let s_min = svals.min();
        if s_min <= 1e-10 * s_max {
            return Err(Error::RankDeficient(format!(
                "feature matrix is rank deficient (singular values range from {s_min} to {s_max})"
            )));
        }
        Ok(LsBasis { matrix })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::Invalid("feature matrix must be nonempty".into()));
        }
        let k = rows[0].len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Invalid("feature rows must all have the same length".into()));
        }
        let n = rows.len();
        Self::new(DMatrix::from_fn(n, k, |i, j| rows[i][j]))
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_functions(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Evaluate Φ r.
    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.num_functions() {
            return Err(Error::Dimension(format!(
                "weight vector has length {}, basis has {} functions",
                r.len(),
                self.num_functions()
            )));
        }
        let v = &self.matrix * DVector::from_column_slice(r);
        Ok(v.data.into())
    }
}

fn check_distribution(d: &[f64], n: usize) -> Result<()> {
    if d.len() != n {
        return Err(Error::Dimension(format!(
            "distribution has length {}, the model has {n} states",
            d.len()
        )));
    }
    if d.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(Error::Invalid(
            "projection distribution must be strictly positive".into(),
        ));
    }
    let total: f64 = d.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::Invalid(format!(
            "projection distribution sums to {total}, expected 1"
        )));
    }
    Ok(())
}

/// ‖x‖_D = √(Σ_i d_i x_i²), the norm the least-squares machinery lives in.
pub fn d_norm(d: &[f64], x: &[f64]) -> f64 {
    d.iter().zip(x).map(|(w, v)| w * v * v).sum::<f64>().sqrt()
}

/// Precomputed D-weighted least-squares projector onto the span of Φ,
/// Π_D u = Φ (ΦᵀDΦ)⁻¹ ΦᵀD u, factored once for repeated application.
struct LsProjector<'a> {
    basis: &'a LsBasis,
    weighted: DMatrix<f64>, // DΦ, cached for the right-hand sides
    chol: Cholesky<f64, nalgebra::Dyn>,
}

impl<'a> LsProjector<'a> {
    fn new(basis: &'a LsBasis, d: &[f64]) -> Result<Self> {
        check_distribution(d, basis.rows())?;
        let mut weighted = basis.matrix.clone();
        for (i, w) in d.iter().enumerate() {
            weighted.row_mut(i).scale_mut(*w);
        }
        let gram = basis.matrix.transpose() * &weighted;
        let chol = Cholesky::new(gram).ok_or_else(|| {
            Error::RankDeficient("the weighted Gram matrix is not positive definite".into())
        })?;
        Ok(LsProjector { basis, weighted, chol })
    }

    /// Returns (r, Φr) with r = (ΦᵀDΦ)⁻¹ ΦᵀD u.
    fn project(&self, u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if u.len() != self.basis.rows() {
            return Err(Error::Dimension(format!(
                "target has length {}, basis has {} rows",
                u.len(),
                self.basis.rows()
            )));
        }
        let rhs = self.weighted.transpose() * DVector::from_column_slice(u);
        let r = self.chol.solve(&rhs);
        let v = &self.basis.matrix * &r;
        Ok((r.data.into(), v.data.into()))
    }
}

/// One-shot D-weighted least-squares projection; returns the weights and
/// the projected vector.
pub fn ls_project(basis: &LsBasis, d: &[f64], u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    LsProjector::new(basis, d)?.project(u)
}

/// Outcome of approximate policy evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApeResult {
    /// Weights r* of the fixed point Φr* of Π_D T_u.
    pub weights: Vec<f64>,
    /// The approximate value Φr*, one entry per state.
    pub value_approx: ValueFunction,
    /// Number of projected Bellman sweeps performed.
    pub iterations: usize,
    /// D-norm distance between the last two iterates.
    pub final_residual: f64,
}

/// Approximate policy evaluation by projected value iteration
/// J ← Π_D T_u J, stopping when successive iterates are within `tol` in the
/// D-norm. With `d` the stationary distribution of the policy the map is an
/// α-contraction in that norm, so the returned iterate is within
/// tol·α/(1−α) of the fixed point.
pub fn ape_with_distribution(
    mdp: &Mdp,
    u: &Policy,
    basis: &LsBasis,
    d: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<ApeResult> {
    check_iteration_params(tol, max_iter)?;
    u.check(mdp)?;
    if basis.rows() != mdp.n() {
        return Err(Error::Dimension(format!(
            "feature matrix has {} rows, the model has {} states",
            basis.rows(),
            mdp.n()
        )));
    }
    let projector = LsProjector::new(basis, d)?;
    let n = mdp.n();
    let p_u = DMatrix::from_fn(n, n, |s, t| mdp.transition(u.action(s), s, t));
    let g_u = DVector::from_fn(n, |s, _| mdp.reward(s, u.action(s)));

    let mut weights = vec![0.0; basis.num_functions()];
    let mut j = DVector::zeros(n);
    let mut residuals = Vec::new();
    for _ in 0..max_iter {
        let backed_up = &g_u + mdp.alpha() * (&p_u * &j);
        let (r, v) = projector.project(backed_up.as_slice())?;
        let v = DVector::from_vec(v);
        let diff: Vec<f64> = (&v - &j).data.into();
        let res = d_norm(d, &diff);
        residuals.push(res);
        weights = r;
        j = v;
        if res <= tol {
            return Ok(ApeResult {
                weights,
                value_approx: ValueFunction(j.data.into()),
                iterations: residuals.len(),
                final_residual: res,
            });
        }
    }
    let res = *residuals.last().expect("at least one sweep ran");
    Err(Error::convergence(max_iter, res, j.data.into(), residuals))
}

/// [`ape_with_distribution`] with D set to the stationary distribution of
/// the policy's transition kernel — the weighting that makes the projected
/// Bellman operator a contraction.
pub fn ape(mdp: &Mdp, u: &Policy, basis: &LsBasis, tol: f64, max_iter: usize) -> Result<ApeResult> {
    let d = stationary_distribution(mdp, u)?;
    ape_with_distribution(mdp, u, basis, &d, tol, max_iter)
}

/// One row of the approximate-policy-iteration log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyLogEntry {
    /// Outer iteration number, starting at 1 for the first improvement.
    pub iteration: usize,
    /// Order-sensitive hash of the improved policy's action vector.
    pub policy_hash: u64,
    /// States whose action changed from the previous policy (n for the
    /// first entry, which has no predecessor).
    pub changed_states: usize,
}

/// Outcome of approximate policy iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApiResult {
    /// Visited policies, starting with the all-zeros initial policy. The
    /// final entry repeats an earlier one: its immediate predecessor on
    /// stabilization, an older one when the iteration cycles.
    pub policies: Vec<Policy>,
    /// Approximate values, one per evaluated policy (the repeated final
    /// policy is not evaluated again).
    pub evaluations: Vec<ValueFunction>,
    /// True when the iteration revisited an older policy instead of
    /// stabilizing — the oscillation that approximate evaluations permit.
    pub chattering: bool,
    /// Per-improvement log: hash and number of changed states.
    pub log: Vec<PolicyLogEntry>,
}

fn hash_policy(u: &Policy) -> u64 {
    let mut h = DefaultHasher::new();
    u.hash(&mut h);
    h.finish()
}

/// Approximate policy iteration: evaluate the current policy with
/// [`ape`] (on-policy stationary weighting), improve greedily, and repeat
/// until the policy repeats. A repeat of the immediate predecessor is
/// stabilization; a repeat of an older policy means the iteration has
/// entered a cycle and will oscillate forever, reported as `chattering`.
/// Fails with a convergence error if no repeat occurs within `outer_iters`
/// improvements; `inner_iters` caps each evaluation's sweeps.
pub fn api(
    mdp: &Mdp,
    basis: &LsBasis,
    tol: f64,
    outer_iters: usize,
    inner_iters: usize,
) -> Result<ApiResult> {
    check_iteration_params(tol, outer_iters)?;
    let mut policies = vec![Policy(vec![0; mdp.n()])];
    let mut evaluations: Vec<ValueFunction> = Vec::new();
    let mut log = Vec::new();
    for iteration in 1..=outer_iters {
        let current = policies.last().expect("starts nonempty").clone();
        let eval = ape(mdp, &current, basis, tol, inner_iters)?;
        evaluations.push(eval.value_approx.clone());
        let improved = greedy_policy(mdp, &eval.value_approx)?;
        let changed = if iteration == 1 {
            mdp.n()
        } else {
            improved.0.iter().zip(&current.0).filter(|(a, b)| a != b).count()
        };
        log.push(PolicyLogEntry { iteration, policy_hash: hash_policy(&improved), changed_states: changed });
        let seen = policies.iter().position(|p| *p == improved);
        policies.push(improved);
        match seen {
            Some(idx) if idx + 2 == policies.len() => {
                // Improved policy equals its predecessor: stabilized.
                return Ok(ApiResult { policies, evaluations, chattering: false, log });
            }
            Some(_) => {
                // Re-entered an older policy: the iteration cycles.
                return Ok(ApiResult { policies, evaluations, chattering: true, log });
            }
            None => {}
        }
    }
    let last = evaluations.last().map(|v| v.0.clone()).unwrap_or_default();
    let changes: Vec<f64> = log.iter().map(|e| e.changed_states as f64).collect();
    let final_change = *changes.last().expect("at least one improvement ran");
    Err(Error::convergence(outer_iters, final_change, last, changes))
}

//! Exact solvers: value iteration, Q-value iteration, direct policy
//! evaluation, policy iteration, and stationary distributions.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mdp::{bellman_t, bellman_t_u, greedy_policy, Mdp, Policy, QFunction, ValueFunction};
use crate::util::{sup_diff, sup_norm};

pub(crate) fn check_iteration_params(tol: f64, max_iter: usize) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Invalid(format!("tolerance must be positive and finite, got {tol}")));
    }
    if max_iter == 0 {
        return Err(Error::Invalid("iteration cap must be at least 1".into()));
    }
    Ok(())
}

/// Successive-approximation threshold that guarantees the returned iterate
/// is within `tol` of the fixed point of an α-contraction.
fn vi_threshold(tol: f64, alpha: f64) -> f64 {
    tol * (1.0 - alpha) / (2.0 * alpha)
}

/// Value iteration from J = 0. Stops once successive iterates differ by at
/// most tol·(1−α)/(2α) in sup norm, which puts the result within tol of J*;
/// with α = 0 one sweep is already exact.
pub fn value_iteration(mdp: &Mdp, tol: f64, max_iter: usize) -> Result<ValueFunction> {
    check_iteration_params(tol, max_iter)?;
    let mut j = ValueFunction(vec![0.0; mdp.n()]);
    if mdp.alpha() == 0.0 {
        return bellman_t(mdp, &j);
    }
    let threshold = vi_threshold(tol, mdp.alpha());
    let mut residuals = Vec::new();
    for _ in 0..max_iter {
        let next = bellman_t(mdp, &j)?;
        let res = sup_diff(next.as_slice(), j.as_slice());
        residuals.push(res);
        j = next;
        if res <= threshold {
            return Ok(j);
        }
    }
    let res = *residuals.last().expect("at least one sweep ran");
    Err(Error::convergence(max_iter, res, j.0, residuals))
}

/// Q-value iteration from Q = 0, with the same stopping rule as
/// [`value_iteration`]; the result is within tol of Q* in sup norm.
pub fn q_value_iteration(mdp: &Mdp, tol: f64, max_iter: usize) -> Result<QFunction> {
    check_iteration_params(tol, max_iter)?;
    let mut q = QFunction::from_flat(mdp.n(), mdp.d(), vec![0.0; mdp.n() * mdp.d()])?;
    if mdp.alpha() == 0.0 {
        return crate::mdp::bellman_h(mdp, &q);
    }
    let threshold = vi_threshold(tol, mdp.alpha());
    let mut residuals = Vec::new();
    for _ in 0..max_iter {
        let next = crate::mdp::bellman_h(mdp, &q)?;
        let res = sup_diff(next.values(), q.values());
        residuals.push(res);
        q = next;
        if res <= threshold {
            return Ok(q);
        }
    }
    let res = *residuals.last().expect("at least one sweep ran");
    Err(Error::convergence(max_iter, res, q.into_values(), residuals))
}

/// Exact policy evaluation by solving the linear system (I − αP_u) J = g_u.
/// The solution is verified against the fixed-point equation to within
/// 1e-10·(1 + ‖J‖∞).
pub fn policy_evaluation_exact(mdp: &Mdp, u: &Policy) -> Result<ValueFunction> {
    u.check(mdp)?;
    let n = mdp.n();
    let a = DMatrix::from_fn(n, n, |s, t| {
        let p = -mdp.alpha() * mdp.transition(u.action(s), s, t);
        if s == t {
            1.0 + p
        } else {
            p
        }
    });
    let g = DVector::from_fn(n, |s, _| mdp.reward(s, u.action(s)));
    let j = a
        .lu()
        .solve(&g)
        .ok_or_else(|| Error::Numeric("policy evaluation system is singular".into()))?;
    let j = ValueFunction(j.iter().copied().collect());
    let residual = sup_diff(bellman_t_u(mdp, u, &j)?.as_slice(), j.as_slice());
    if residual > 1e-10 * (1.0 + sup_norm(j.as_slice())) {
        return Err(Error::Numeric(format!(
            "policy evaluation residual {residual:.3e} exceeds its certificate"
        )));
    }
    Ok(j)
}

/// Policy iteration with exact evaluation, starting from the all-zeros
/// policy and stopping when the greedy improvement returns the same policy.
pub fn policy_iteration(mdp: &Mdp) -> Result<(Policy, ValueFunction)> {
    let cap = 10 * mdp.n() + 10;
    let mut u = Policy(vec![0; mdp.n()]);
    let mut j = policy_evaluation_exact(mdp, &u)?;
    for _ in 0..cap {
        let improved = greedy_policy(mdp, &j)?;
        if improved == u {
            return Ok((u, j));
        }
        u = improved;
        j = policy_evaluation_exact(mdp, &u)?;
    }
    let res = sup_diff(bellman_t(mdp, &j)?.as_slice(), j.as_slice());
    Err(Error::convergence(cap, res, j.0, Vec::new()))
}

/// Stationary distribution of P_u by power iteration; errors if the chain
/// does not settle, in which case the regularized variant below applies.
pub fn stationary_distribution(mdp: &Mdp, u: &Policy) -> Result<Vec<f64>> {
    stationary_distribution_regularized(mdp, u, 0.0)
}

/// Stationary distribution of the mixed kernel (1−λ)P_u + λ·uniform. λ > 0
/// forces aperiodicity and irreducibility, at the cost of solving a slightly
/// different chain; λ = 0 is the plain kernel.
pub fn stationary_distribution_regularized(mdp: &Mdp, u: &Policy, lambda: f64) -> Result<Vec<f64>> {
    u.check(mdp)?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Invalid(format!("mixing weight must lie in [0, 1], got {lambda}")));
    }
    let n = mdp.n();
    let uniform = lambda / n as f64;
    let keep = 1.0 - lambda;
    let mut pi = vec![1.0 / n as f64; n];
    let mut next = vec![0.0; n];
    const CAP: usize = 200_000;
    for _ in 0..CAP {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (s, &w) in pi.iter().enumerate() {
            let row = mdp.transition_row(u.action(s), s);
            for (nx, p) in next.iter_mut().zip(row) {
                *nx += w * (keep * p + uniform);
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        // π is a probability vector throughout, so the successive difference
        // equals the fixed-point residual ‖πᵀP − πᵀ‖∞.
        let res = sup_diff(&next, &pi);
        std::mem::swap(&mut pi, &mut next);
        if res <= 1e-12 {
            return Ok(pi);
        }
    }
    Err(Error::Numeric(format!(
        "power iteration did not settle within {CAP} sweeps; \
         the chain may be periodic or slowly mixing — retry with \
         stationary_distribution_regularized and a small positive mixing weight"
    )))
}

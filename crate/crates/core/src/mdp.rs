//! Finite discounted-reward MDPs and their Bellman operators.
//!
//! A model has n states, d actions, per-pair rewards g_a(s), per-action row
//! stochastic transition kernels P_a, and a discount α ∈ [0, 1). Q-functions
//! are stored flat with index(s, a) = s·d + a; that same layout is the
//! canonical flattening used by the min-plus approximation schemes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite discounted MDP. Construction validates shapes, reward
/// finiteness, row stochasticity (sum within 1e-12 of one, entries ≥ 0) and
/// α ∈ [0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMdp", into = "RawMdp")]
pub struct Mdp {
    n: usize,
    d: usize,
    alpha: f64,
    /// Rewards, flat with index s·d + a.
    rewards: Vec<f64>,
    /// One row-major n×n kernel per action.
    transitions: Vec<Vec<f64>>,
}

/// On-disk shape: rewards indexed [s][a], transitions indexed [a][s][s'].
#[derive(Serialize, Deserialize)]
struct RawMdp {
    n: usize,
    d: usize,
    alpha: f64,
    rewards: Vec<Vec<f64>>,
    transitions: Vec<Vec<Vec<f64>>>,
}

impl Mdp {
    pub fn new(rewards: Vec<Vec<f64>>, transitions: Vec<Vec<Vec<f64>>>, alpha: f64) -> Result<Self> {
        let n = rewards.len();
        if n == 0 {
            return Err(Error::Invalid("model needs at least one state".into()));
        }
        let d = rewards[0].len();
        if d == 0 {
            return Err(Error::Invalid("model needs at least one action".into()));
        }
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::Invalid(format!("discount must lie in [0, 1), got {alpha}")));
        }
        if let Some(s) = rewards.iter().position(|row| row.len() != d) {
            return Err(Error::Dimension(format!(
                "reward row {s} has {} entries, expected {d}",
                rewards[s].len()
            )));
        }
        if rewards.iter().flatten().any(|g| !g.is_finite()) {
            return Err(Error::Invalid("rewards must be finite".into()));
        }
        if transitions.len() != d {
            return Err(Error::Dimension(format!(
                "{} transition kernels for {d} actions",
                transitions.len()
            )));
        }
        let mut kernels = Vec::with_capacity(d);
        for (a, kernel) in transitions.iter().enumerate() {
            if kernel.len() != n {
                return Err(Error::Dimension(format!(
                    "kernel {a} has {} rows, expected {n}",
                    kernel.len()
                )));
            }
            let mut flat = Vec::with_capacity(n * n);
            for (s, row) in kernel.iter().enumerate() {
                if row.len() != n {
                    return Err(Error::Dimension(format!(
                        "kernel {a} row {s} has {} entries, expected {n}",
                        row.len()
                    )));
                }
                let mut sum = 0.0;
                for &p in row {
                    if p < 0.0 || !p.is_finite() {
                        return Err(Error::Invalid(format!(
                            "kernel {a} row {s} has entry {p}, probabilities must be finite and nonnegative"
                        )));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > 1e-12 {
                    return Err(Error::Invalid(format!(
                        "kernel {a} row {s} sums to {sum}, expected 1 within 1e-12"
                    )));
                }
                flat.extend_from_slice(row);
            }
            kernels.push(flat);
        }
        let flat_rewards = rewards.into_iter().flatten().collect();
        Ok(Mdp { n, d, alpha, rewards: flat_rewards, transitions: kernels })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.d + a]
    }

    /// Rewards in the canonical Q layout (index s·d + a).
    pub fn rewards_flat(&self) -> &[f64] {
        &self.rewards
    }

    #[inline]
    pub fn transition_row(&self, a: usize, s: usize) -> &[f64] {
        &self.transitions[a][s * self.n..(s + 1) * self.n]
    }

    #[inline]
    pub fn transition(&self, a: usize, s: usize, t: usize) -> f64 {
        self.transitions[a][s * self.n + t]
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("MDPs serialize cleanly");
        crate::util::write_atomic(path, text.as_bytes())
    }
}

impl TryFrom<RawMdp> for Mdp {
    type Error = Error;

    fn try_from(raw: RawMdp) -> Result<Self> {
        let mdp = Mdp::new(raw.rewards, raw.transitions, raw.alpha)?;
        if mdp.n != raw.n || mdp.d != raw.d {
            return Err(Error::Dimension(format!(
                "declared shape {}x{} does not match data shape {}x{}",
                raw.n, raw.d, mdp.n, mdp.d
            )));
        }
        Ok(mdp)
    }
}

impl From<Mdp> for RawMdp {
    fn from(mdp: Mdp) -> RawMdp {
        let rewards = (0..mdp.n)
            .map(|s| (0..mdp.d).map(|a| mdp.reward(s, a)).collect())
            .collect();
        let transitions = (0..mdp.d)
            .map(|a| (0..mdp.n).map(|s| mdp.transition_row(a, s).to_vec()).collect())
            .collect();
        RawMdp { n: mdp.n, d: mdp.d, alpha: mdp.alpha, rewards, transitions }
    }
}

/// Deterministic stationary policy: one action index per state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Policy(pub Vec<usize>);

impl Policy {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn action(&self, s: usize) -> usize {
        self.0[s]
    }

    pub(crate) fn check(&self, mdp: &Mdp) -> Result<()> {
        if self.len() != mdp.n() {
            return Err(Error::Dimension(format!(
                "policy covers {} states, model has {}",
                self.len(),
                mdp.n()
            )));
        }
        if let Some(s) = self.0.iter().position(|&a| a >= mdp.d()) {
            return Err(Error::Invalid(format!(
                "policy picks action {} in state {s}, model has {} actions",
                self.0[s],
                mdp.d()
            )));
        }
        Ok(())
    }
}

/// State value function J ∈ ℝ^n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction(pub Vec<f64>);

impl ValueFunction {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// State-action value function Q ∈ ℝ^{n×d}, stored flat with
/// index(s, a) = s·d + a.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QFunction {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl QFunction {
    pub fn from_flat(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * d {
            return Err(Error::Dimension(format!(
                "{} values for a {n}x{d} Q-function",
                values.len()
            )));
        }
        Ok(QFunction { n, d, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.d + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.d..(s + 1) * self.d]
    }

    /// Flat view in the canonical layout.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// J(s) = max_a Q(s, a).
    pub fn row_max(&self) -> ValueFunction {
        ValueFunction(
            (0..self.n)
                .map(|s| self.row(s).iter().fold(f64::NEG_INFINITY, |m, q| m.max(*q)))
                .collect(),
        )
    }
}

fn expect_len(len: usize, n: usize, what: &str) -> Result<()> {
    if len != n {
        return Err(Error::Dimension(format!("{what} has length {len}, expected {n}")));
    }
    Ok(())
}

/// Optimal Bellman operator (T J)(s) = max_a [ g_a(s) + α Σ_{s'} P_a(s,s') J(s') ].
pub fn bellman_t(mdp: &Mdp, j: &ValueFunction) -> Result<ValueFunction> {
    expect_len(j.len(), mdp.n(), "value function")?;
    let out = (0..mdp.n())
        .map(|s| {
            (0..mdp.d())
                .map(|a| backup(mdp, s, a, j.as_slice()))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(ValueFunction(out))
}

/// Policy-restricted Bellman operator (T_u J)(s) = g_{u(s)}(s) + α Σ P_{u(s)}(s,s') J(s').
pub fn bellman_t_u(mdp: &Mdp, u: &Policy, j: &ValueFunction) -> Result<ValueFunction> {
    u.check(mdp)?;
    expect_len(j.len(), mdp.n(), "value function")?;
    let out = (0..mdp.n())
        .map(|s| backup(mdp, s, u.action(s), j.as_slice()))
        .collect();
    Ok(ValueFunction(out))
}

/// Q-Bellman operator (H Q)(s, a) = g_a(s) + α Σ_{s'} P_a(s,s') max_b Q(s', b).
pub fn bellman_h(mdp: &Mdp, q: &QFunction) -> Result<QFunction> {
    if q.n() != mdp.n() || q.d() != mdp.d() {
        return Err(Error::Dimension(format!(
            "Q-function is {}x{}, model is {}x{}",
            q.n(),
            q.d(),
            mdp.n(),
            mdp.d()
        )));
    }
    let maxes = q.row_max();
    let mut values = Vec::with_capacity(mdp.n() * mdp.d());
    for s in 0..mdp.n() {
        for a in 0..mdp.d() {
            values.push(backup(mdp, s, a, maxes.as_slice()));
        }
    }
    QFunction::from_flat(mdp.n(), mdp.d(), values)
}

#[inline]
fn backup(mdp: &Mdp, s: usize, a: usize, j: &[f64]) -> f64 {
    let row = mdp.transition_row(a, s);
    let mut exp = 0.0;
    for (p, v) in row.iter().zip(j) {
        exp += p * v;
    }
    mdp.reward(s, a) + mdp.alpha() * exp
}

/// One-step greedy policy with respect to J; ties go to the lowest action
/// index.
pub fn greedy_policy(mdp: &Mdp, j: &ValueFunction) -> Result<Policy> {
    expect_len(j.len(), mdp.n(), "value function")?;
    let actions = (0..mdp.n())
        .map(|s| {
            let mut best_a = 0;
            let mut best = f64::NEG_INFINITY;
            for a in 0..mdp.d() {
                let v = backup(mdp, s, a, j.as_slice());
                if v > best {
                    best = v;
                    best_a = a;
                }
            }
            best_a
        })
        .collect();
    Ok(Policy(actions))
}

/// Row-wise argmax of a Q-function; ties go to the lowest action index.
pub fn greedy_from_q(q: &QFunction) -> Policy {
    let actions = (0..q.n())
        .map(|s| {
            let row = q.row(s);
            let mut best_a = 0;
            let mut best = f64::NEG_INFINITY;
            for (a, &v) in row.iter().enumerate() {
                if v > best {
                    best = v;
                    best_a = a;
                }
            }
            best_a
        })
        .collect();
    Policy(actions)
}

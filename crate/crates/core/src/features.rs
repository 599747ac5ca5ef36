//! Feature-matrix construction for min-plus approximation.
//!
//! The approximation architectures in this crate are min-plus spans
//! M = {Φ ⊗ r : r ∈ (ℝ ∪ {+∞})^k} of a feature matrix Φ over state-action
//! pairs. This module builds the two stock choices — indicator features of
//! reward bins and the full (identity) basis — and reads/writes feature
//! matrices as JSON.
//!
//! Reward-bin features partition the reward range [g_min, g_max] into k
//! closed intervals of equal length and attach one basis function to each:
//! φ_j(s, a) = 0 when g_a(s) lies in bin j and +∞ otherwise. A reward that
//! falls exactly on an interior breakpoint belongs to both adjacent bins, so
//! membership is never empty and the span always covers every coordinate.
//! Two state-action pairs are "similar" when they share a bin; the +∞
//! entries make dissimilar pairs infinitely far apart in the min-plus sense.
//!
//! Because infinite entries participate in every projection, a run can
//! instead substitute a large finite sentinel for +∞ ([`InfinityMode`]).
//! With a sentinel far above the spread of the fixed point the iterates are
//! unchanged in practice, and every intermediate quantity stays finite.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::Mdp;
use crate::minplus::{MinPlusMatrix, SpanBasis, ONE, ZERO};
use crate::util::write_atomic;

/// How feature matrices represent "this basis function does not cover this
/// coordinate": a genuine +∞ entry, or a large finite sentinel.
///
/// Serialized form: `"exact"` or `{"sentinel": 1000.0}`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfinityMode {
    /// Keep +∞ entries. All projection arithmetic on {0, +∞} matrices is
    /// then exact (no rounding), which the variational machinery exploits.
    #[default]
    Exact,
    /// Replace +∞ by this value. Must be finite and strictly positive, and
    /// should dominate the spread of the value functions involved.
    Sentinel(f64),
}

impl InfinityMode {
    /// Apply the mode to a basis built with exact +∞ entries.
    pub fn apply(&self, basis: &SpanBasis) -> Result<SpanBasis> {
        match *self {
            InfinityMode::Exact => Ok(basis.clone()),
            InfinityMode::Sentinel(v) => {
                if !v.is_finite() || v <= 0.0 {
                    return Err(Error::Invalid(format!(
                        "sentinel must be finite and positive, got {v}"
                    )));
                }
                basis.with_infinity_as(v)
            }
        }
    }
}

/// Indicator features of k equal-width reward bins, one basis function per
/// bin, over the flattened state-action index (s, a) ↦ s·d + a.
///
/// Breakpoints are b_i = g_min + i·(g_max − g_min)/k with b_0 and b_k pinned
/// to g_min and g_max exactly; bin j is the closed interval [b_j, b_{j+1}].
/// When every reward is equal the range collapses and all bins cover all
/// coordinates, so the span degenerates to the constants — still a valid
/// basis. Entries are 0 (member) or +∞ (non-member); compose with
/// [`InfinityMode::apply`] for sentinel runs.
pub fn build_reward_bins(mdp: &Mdp, k: usize) -> Result<SpanBasis> {
    if k == 0 {
        return Err(Error::Invalid("number of reward bins must be at least 1".into()));
    }
    let rewards = mdp.rewards_flat();
    let g_min = rewards.iter().cloned().fold(f64::INFINITY, f64::min);
    let g_max = rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = g_max - g_min;
    let mut breaks = Vec::with_capacity(k + 1);
    for i in 0..=k {
        breaks.push(g_min + (i as f64) * width / (k as f64));
    }
    breaks[0] = g_min;
    breaks[k] = g_max;

    let mut data = Vec::with_capacity(rewards.len() * k);
    for &g in rewards {
        for j in 0..k {
            let member = breaks[j] <= g && g <= breaks[j + 1];
            data.push(if member { ONE } else { ZERO });
        }
    }
    SpanBasis::new(MinPlusMatrix::new(rewards.len(), k, data)?)
}

/// The full basis: the min-plus identity matrix, whose span is the whole
/// space. Projection onto this span is the identity map, so approximate
/// methods run with it must reproduce their exact counterparts.
pub fn build_full_basis(size: usize) -> Result<SpanBasis> {
    if size == 0 {
        return Err(Error::Invalid("basis size must be at least 1".into()));
    }
    SpanBasis::new(MinPlusMatrix::identity(size))
}

/// Read a feature matrix from a JSON file (a 2-D array; +∞ spelled "inf").
pub fn load_features(path: impl AsRef<Path>) -> Result<SpanBasis> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let matrix: MinPlusMatrix =
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
    SpanBasis::new(matrix)
}

/// Write a feature matrix as pretty-printed JSON (+∞ spelled "inf").
pub fn save_features(basis: &SpanBasis, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_vec_pretty(basis.matrix())
        .map_err(|e| Error::parse(path, e.to_string()))?;
    write_atomic(path, &text)
}

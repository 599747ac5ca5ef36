//! Min-plus (tropical) linear algebra over ℝ ∪ {+∞}.
//!
//! The scalar semiring uses ⊕ = min with identity +∞ and ⊗ = + with
//! identity 0. +∞ is absorbing for ⊗, so `mul(+∞, x) = +∞` for every `x`;
//! this is the convention that keeps the semiring laws intact on the
//! completed line and means the ill-posed sum (+∞) + (−∞) is never formed.
//! −∞ can appear transiently while residuating but is never stored in a
//! vector or matrix.
//!
//! A matrix Φ with columns φ_1, ..., φ_k spans the subsemimodule
//! 𝒱 = { Φ ⊗ r : r ∈ (ℝ ∪ {+∞})^k }, where (Φ ⊗ r)(i) = min_j (Φ(i,j) + r(j)).
//! Residuation recovers, for a target u, the componentwise-least weights r
//! with Φ ⊗ r ≥ u, and `project` composes the two to get the least element
//! of 𝒱 that majorizes u.

use serde::de::Error as _;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Additive identity of the min-plus semiring.
pub const ZERO: f64 = f64::INFINITY;
/// Multiplicative identity of the min-plus semiring.
pub const ONE: f64 = 0.0;

/// a ⊕ b = min(a, b).
#[inline]
pub fn add(a: f64, b: f64) -> f64 {
    a.min(b)
}

/// a ⊗ b = a + b, with +∞ absorbing.
#[inline]
pub fn mul(a: f64, b: f64) -> f64 {
    if a == f64::INFINITY || b == f64::INFINITY {
        f64::INFINITY
    } else {
        a + b
    }
}

fn check_entry(x: f64, what: &str) -> Result<()> {
    if x.is_nan() {
        return Err(Error::Invalid(format!("{what} contains NaN")));
    }
    if x == f64::NEG_INFINITY {
        return Err(Error::Invalid(format!("{what} contains -inf")));
    }
    Ok(())
}

fn check_finite_vector(u: &[f64], what: &str) -> Result<()> {
    if let Some(i) = u.iter().position(|x| !x.is_finite()) {
        return Err(Error::Invalid(format!(
            "{what} must be finite, entry {i} is {}",
            u[i]
        )));
    }
    Ok(())
}

/// Min-plus dot product min_i (x(i) + y(i)); +∞ entries drop out of the min
/// unless they make up the whole sum, in which case the result is +∞.
pub fn dot(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "dot of lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(x.iter()
        .zip(y)
        .fold(ZERO, |acc, (a, b)| add(acc, mul(*a, *b))))
}

/// Dense row-major matrix over ℝ ∪ {+∞}. NaN and −∞ are rejected at
/// construction; +∞ marks entries a min-plus combination can never use.
#[derive(Debug, Clone, PartialEq)]
pub struct MinPlusMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl MinPlusMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Invalid("matrix must have at least one row and one column".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        for &x in &data {
            check_entry(x, "matrix")?;
        }
        Ok(MinPlusMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Invalid("matrix must have at least one row".into()));
        }
        let cols = rows[0].len();
        if let Some(i) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::Dimension(format!(
                "row {i} has {} entries, expected {cols}",
                rows[i].len()
            )));
        }
        Self::new(n, cols, rows.into_iter().flatten().collect())
    }

    /// Min-plus identity: 0 on the diagonal, +∞ elsewhere.
    pub fn identity(n: usize) -> Self {
        let mut data = vec![ZERO; n * n];
        for i in 0..n {
            data[i * n + i] = ONE;
        }
        MinPlusMatrix { rows: n, cols: n, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Replace every +∞ entry by `value`, leaving finite entries alone.
    pub fn with_infinity_as(&self, value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::Invalid(format!(
                "substitute for +inf must be finite, got {value}"
            )));
        }
        let data = self
            .data
            .iter()
            .map(|&x| if x == f64::INFINITY { value } else { x })
            .collect();
        Ok(MinPlusMatrix { rows: self.rows, cols: self.cols, data })
    }

    /// Min-plus matrix-vector product: out(i) = min_j (Φ(i,j) + x(j)).
    pub fn mat_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Dimension(format!(
                "mat_vec of {}x{} matrix with vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(ZERO, |acc, (a, b)| add(acc, mul(*a, *b)))
            })
            .collect())
    }

    /// Min-plus product of the transpose with `rhs`:
    /// out(m, j) = min_i (self(i,m) + rhs(i,j)).
    pub fn transpose_mul(&self, rhs: &MinPlusMatrix) -> Result<MinPlusMatrix> {
        if self.rows != rhs.rows {
            return Err(Error::Dimension(format!(
                "transpose_mul of {}x{} with {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut data = vec![ZERO; self.cols * rhs.cols];
        for i in 0..self.rows {
            let left = self.row(i);
            let right = rhs.row(i);
            for (m, &w) in left.iter().enumerate() {
                if w == f64::INFINITY {
                    continue;
                }
                let out = &mut data[m * rhs.cols..(m + 1) * rhs.cols];
                for (o, &p) in out.iter_mut().zip(right) {
                    *o = add(*o, mul(w, p));
                }
            }
        }
        Ok(MinPlusMatrix { rows: self.cols, cols: rhs.cols, data })
    }

    /// Min-plus product of the transpose with a vector:
    /// out(m) = min_i (self(i,m) + u(i)).
    pub fn transpose_mat_vec(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.rows {
            return Err(Error::Dimension(format!(
                "transpose_mat_vec of {}x{} matrix with vector of length {}",
                self.rows,
                self.cols,
                u.len()
            )));
        }
        let mut out = vec![ZERO; self.cols];
        for (i, &ui) in u.iter().enumerate() {
            for (o, &w) in out.iter_mut().zip(self.row(i)) {
                *o = add(*o, mul(w, ui));
            }
        }
        Ok(out)
    }
}

/// Feature matrix whose columns span a min-plus subsemimodule. Construction
/// enforces that every row has at least one finite entry, so every
/// coordinate can be covered by a finite combination.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanBasis {
    matrix: MinPlusMatrix,
}

impl SpanBasis {
    pub fn new(matrix: MinPlusMatrix) -> Result<Self> {
        for i in 0..matrix.rows() {
            if matrix.row(i).iter().all(|x| *x == f64::INFINITY) {
                return Err(Error::Invalid(format!(
                    "row {i} of the feature matrix has no finite entry"
                )));
            }
        }
        Ok(SpanBasis { matrix })
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    /// Number of basis functions (columns of Φ).
    pub fn num_functions(&self) -> usize {
        self.matrix.cols()
    }

    pub fn matrix(&self) -> &MinPlusMatrix {
        &self.matrix
    }

    /// Evaluate the combination Φ ⊗ r.
    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.matrix.mat_vec(r)
    }

    /// Same basis with +∞ entries replaced by a finite sentinel value.
    pub fn with_infinity_as(&self, value: f64) -> Result<SpanBasis> {
        Ok(SpanBasis { matrix: self.matrix.with_infinity_as(value)? })
    }
}

/// Residuation (the ⊗-adjoint): the componentwise-least r with Φ ⊗ r ≥ u,
/// given by r(j) = max_i (u(i) − Φ(i,j)) over the finite entries of column j.
/// A column with no finite entry contributes nothing to any combination and
/// gets r(j) = +∞; a row with no finite entry means u(i) cannot be covered
/// and is an error.
pub fn residuate(phi: &MinPlusMatrix, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != phi.rows() {
        return Err(Error::Dimension(format!(
            "residuate of {}x{} matrix against vector of length {}",
            phi.rows(),
            phi.cols(),
            u.len()
        )));
    }
    check_finite_vector(u, "residuation target")?;
    let mut r = vec![f64::NEG_INFINITY; phi.cols()];
    for (i, &ui) in u.iter().enumerate() {
        let mut row_has_finite = false;
        for (rj, &p) in r.iter_mut().zip(phi.row(i)) {
            if p == f64::INFINITY {
                continue;
            }
            row_has_finite = true;
            *rj = rj.max(ui - p);
        }
        if !row_has_finite {
            return Err(Error::ProjectionUndefined { row: i });
        }
    }
    // Columns no constraint ever touched are entirely +∞ and stay unused.
    for rj in &mut r {
        if *rj == f64::NEG_INFINITY {
            *rj = f64::INFINITY;
        }
    }
    Ok(r)
}

/// Least element of span(Φ) that majorizes u, together with the weights that
/// realize it: v = Φ ⊗ residuate(Φ, u).
pub fn project_with_weights(basis: &SpanBasis, u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let r = residuate(basis.matrix(), u)?;
    let v = basis.apply(&r).expect("residuation yields weights of matching width");
    debug_assert!(v.iter().all(|x| x.is_finite()));
    Ok((r, v))
}

/// Subsemimodule projection Π u = min { v ∈ span(Φ) : v ≥ u }.
pub fn project(basis: &SpanBasis, u: &[f64]) -> Result<Vec<f64>> {
    project_with_weights(basis, u).map(|(_, v)| v)
}

/// Variational projection operator against a test matrix W, with the
/// constraint matrix A = Wᵀ ⊗ Φ precomputed. Use this form when projecting
/// many vectors against the same (Φ, W) pair, e.g. inside an iterative
/// solver; [`project_variational_with_weights`] is the one-shot wrapper.
pub struct VariationalProjector<'a> {
    basis: &'a SpanBasis,
    w: &'a MinPlusMatrix,
    a: MinPlusMatrix,
}

impl<'a> VariationalProjector<'a> {
    pub fn new(basis: &'a SpanBasis, w: &'a MinPlusMatrix) -> Result<Self> {
        if w.rows() != basis.rows() {
            return Err(Error::Dimension(format!(
                "test matrix has {} rows, features have {}",
                w.rows(),
                basis.rows()
            )));
        }
        for m in 0..w.cols() {
            if (0..w.rows()).all(|i| w.get(i, m) == f64::INFINITY) {
                return Err(Error::Invalid(format!(
                    "column {m} of the test matrix has no finite entry"
                )));
            }
        }
        let a = w.transpose_mul(basis.matrix())?;
        Ok(VariationalProjector { basis, w, a })
    }

    /// The least combination Φ ⊗ r whose min-plus scalar products with the
    /// test vectors dominate those of u, i.e. Wᵀ ⊗ (Φ ⊗ r) ≥ Wᵀ ⊗ u,
    /// computed by residuating A against b = Wᵀ ⊗ u. With W the min-plus
    /// identity this agrees with [`project`]. Returns (r, Φ ⊗ r).
    pub fn project_with_weights(&self, u: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if u.len() != self.basis.rows() {
            return Err(Error::Dimension(format!(
                "target has length {}, features have {} rows",
                u.len(),
                self.basis.rows()
            )));
        }
        check_finite_vector(u, "projection target")?;
        let b = self.w.transpose_mat_vec(u)?;
        let mut r = vec![f64::NEG_INFINITY; self.a.cols()];
        for (m, &bm) in b.iter().enumerate() {
            for (rj, &amj) in r.iter_mut().zip(self.a.row(m)) {
                if amj == f64::INFINITY {
                    continue;
                }
                *rj = rj.max(bm - amj);
            }
        }
        // A basis function invisible to every test vector is dropped
        // (weight +∞); it cannot be pinned down by the constraints.
        for rj in &mut r {
            if *rj == f64::NEG_INFINITY {
                *rj = f64::INFINITY;
            }
        }
        let v = self.basis.apply(&r).expect("residuation yields weights of matching width");
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::ProjectionUndefined { row: i });
        }
        Ok((r, v))
    }
}

/// One-shot variational projection; see [`VariationalProjector`].
pub fn project_variational_with_weights(
    basis: &SpanBasis,
    w: &MinPlusMatrix,
    u: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    VariationalProjector::new(basis, w)?.project_with_weights(u)
}

/// Variational projection Π^W u; see [`project_variational_with_weights`].
pub fn project_variational(basis: &SpanBasis, w: &MinPlusMatrix, u: &[f64]) -> Result<Vec<f64>> {
    project_variational_with_weights(basis, w, u).map(|(_, v)| v)
}

// JSON mapping: matrices and weight vectors are arrays of numbers with the
// string "inf" standing in for +∞, which JSON itself cannot express.

fn entry_to_json(x: f64) -> serde_json::Value {
    if x == f64::INFINITY {
        serde_json::Value::String("inf".into())
    } else {
        serde_json::Number::from_f64(x)
            .map(serde_json::Value::Number)
            .expect("min-plus entries are finite or +inf")
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonEntry {
    Num(f64),
    Tok(String),
}

fn entry_from_json(e: JsonEntry) -> std::result::Result<f64, String> {
    match e {
        JsonEntry::Num(x) => {
            if x.is_finite() {
                Ok(x)
            } else {
                Err(format!("non-finite numeric entry {x}"))
            }
        }
        JsonEntry::Tok(s) if s == "inf" => Ok(f64::INFINITY),
        JsonEntry::Tok(s) => Err(format!("unrecognized entry {s:?}, expected a number or \"inf\"")),
    }
}

impl Serialize for MinPlusMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.rows))?;
        for i in 0..self.rows {
            let row: Vec<serde_json::Value> =
                self.row(i).iter().map(|&x| entry_to_json(x)).collect();
            seq.serialize_element(&row)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for MinPlusMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw: Vec<Vec<JsonEntry>> = Vec::deserialize(deserializer)?;
        let rows: Vec<Vec<f64>> = raw
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.into_iter()
                    .map(|e| entry_from_json(e).map_err(|m| D::Error::custom(format!("row {i}: {m}"))))
                    .collect()
            })
            .collect::<std::result::Result<_, _>>()?;
        MinPlusMatrix::from_rows(rows).map_err(|e| D::Error::custom(e.to_string()))
    }
}

/// serde adapter for weight vectors that may contain +∞, for use with
/// `#[serde(with = "minplus::json_vec")]`.
pub mod json_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f64], serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let entries: Vec<serde_json::Value> = v.iter().map(|&x| entry_to_json(x)).collect();
        entries.serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Vec<f64>, D::Error> {
        let raw: Vec<JsonEntry> = Vec::deserialize(deserializer)?;
        raw.into_iter()
            .map(|e| entry_from_json(e).map_err(D::Error::custom))
            .collect()
    }
}

/// Write a matrix as CSV with the same "inf" convention as the JSON format.
pub fn write_csv<Wr: std::io::Write>(phi: &MinPlusMatrix, out: &mut Wr) -> std::io::Result<()> {
    for i in 0..phi.rows() {
        let line: Vec<String> = phi
            .row(i)
            .iter()
            .map(|&x| {
                if x == f64::INFINITY {
                    "inf".to_string()
                } else {
                    format!("{x}")
                }
            })
            .collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

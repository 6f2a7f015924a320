//! Small dense linear systems.
//!
//! The likelihood equations for the row/column nonresponse odds are square
//! systems of at most a few dozen unknowns, so a plain row-major matrix with
//! partial-pivoting elimination is all the machinery required. Alongside
//! the direct solver this module carries Kaykobad's row-dominance test
//! (which certifies a strictly positive solution) and the diagonal
//! fixed-point iteration whose convergence that same test guarantees.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::LinalgError;
use crate::serde_float::Float;

/// Pivot magnitudes below this fraction of `‖A‖∞` are treated as zero.
pub const PIVOT_TOLERANCE: f64 = 1e-12;
/// Default stopping tolerance for [`solve_iterative`].
pub const DEFAULT_ITER_TOL: f64 = 1e-10;
/// Default iteration cap for [`solve_iterative`].
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<Float>>", into = "Vec<Vec<Float>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows. Fails on ragged input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, LinalgError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != ncols {
                return Err(LinalgError::Shape(format!(
                    "ragged rows: expected {ncols} columns, found {}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: nrows,
            cols: ncols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().copied().map(f).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.data.iter()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (o, v) in out.iter_mut().zip(self.row(i)) {
                *o += v;
            }
        }
        out
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "dimension mismatch in mul_vec");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl TryFrom<Vec<Vec<Float>>> for Matrix {
    type Error = LinalgError;

    fn try_from(rows: Vec<Vec<Float>>) -> Result<Self, Self::Error> {
        let rows: Vec<Vec<f64>> = rows
            .into_iter()
            .map(|r| r.into_iter().map(|x| x.0).collect())
            .collect();
        Matrix::from_rows(&rows)
    }
}

impl From<Matrix> for Vec<Vec<Float>> {
    fn from(m: Matrix) -> Self {
        m.to_rows()
            .into_iter()
            .map(|r| r.into_iter().map(Float).collect())
            .collect()
    }
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// A square system `A x = b` meeting the hypotheses of Kaykobad's lemma:
/// non-negative off-diagonal entries, positive diagonal, positive `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    a: Matrix,
    b: Vec<f64>,
}

impl LinearSystem {
    pub fn new(a: Matrix, b: Vec<f64>) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::Shape(format!(
                "matrix is {}x{}, expected square",
                a.rows(),
                a.cols()
            )));
        }
        if b.len() != a.rows() {
            return Err(LinalgError::Shape(format!(
                "rhs has length {}, matrix has {} rows",
                b.len(),
                a.rows()
            )));
        }
        let n = a.rows();
        for i in 0..n {
            for j in 0..n {
                let v = a[(i, j)];
                if !v.is_finite() {
                    return Err(LinalgError::Hypothesis(format!(
                        "a[{i}][{j}] is not finite"
                    )));
                }
                if i == j && v <= 0.0 {
                    return Err(LinalgError::Hypothesis(format!(
                        "diagonal entry a[{i}][{i}] = {v} is not positive"
                    )));
                }
                if i != j && v < 0.0 {
                    return Err(LinalgError::Hypothesis(format!(
                        "off-diagonal entry a[{i}][{j}] = {v} is negative"
                    )));
                }
            }
        }
        if let Some((j, v)) = b.iter().enumerate().find(|(_, v)| v.is_nan() || **v <= 0.0) {
            return Err(LinalgError::Hypothesis(format!(
                "rhs entry b[{j}] = {v} is not positive"
            )));
        }
        Ok(Self { a, b })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn solve_direct(&self) -> Result<Vec<f64>, LinalgError> {
        solve_direct(&self.a, &self.b)
    }
}

/// One row of the dominance test `b_i > Σ_{j≠i} a_ij b_j / a_jj`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominanceRow {
    pub row: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// Strict inequality `lhs > rhs`.
    pub holds: bool,
    /// `lhs == rhs`; reported as a failure of the strict inequality.
    pub at_boundary: bool,
}

pub fn kaykobad_dominates(s: &LinearSystem) -> Vec<DominanceRow> {
    let a = s.matrix();
    let b = s.rhs();
    let n = s.dim();
    (0..n)
        .map(|i| {
            let rhs: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| a[(i, j)] * b[j] / a[(j, j)])
                .sum();
            let lhs = b[i];
            DominanceRow {
                row: i,
                lhs,
                rhs,
                holds: lhs > rhs,
                at_boundary: lhs == rhs,
            }
        })
        .collect()
}

/// Solves a general square system by Gaussian elimination with partial
/// pivoting. Negative components are returned as-is.
pub fn solve_direct(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if !a.is_square() {
        return Err(LinalgError::Shape(format!(
            "matrix is {}x{}, expected square",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if b.len() != n {
        return Err(LinalgError::Shape(format!(
            "rhs has length {}, matrix has {n} rows",
            b.len()
        )));
    }
    let scale = a.norm_inf();
    let threshold = PIVOT_TOLERANCE * scale;
    let mut m = a.clone();
    let mut x = b.to_vec();

    for col in 0..n {
        let (pivot_row, pivot_abs) =
            (col..n)
                .map(|r| (r, m[(r, col)].abs()))
                .fold(
                    (col, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if pivot_abs.is_nan() || pivot_abs < threshold || pivot_abs == 0.0 {
            return Err(LinalgError::Singular {
                column: col,
                pivot: pivot_abs,
                threshold,
            });
        }
        if pivot_row != col {
            for k in 0..n {
                m.data.swap(col * n + k, pivot_row * n + k);
            }
            x.swap(col, pivot_row);
        }
        let p = m[(col, col)];
        for r in col + 1..n {
            let factor = m[(r, col)] / p;
            if factor == 0.0 {
                continue;
            }
            m[(r, col)] = 0.0;
            for k in col + 1..n {
                let v = m[(col, k)];
                m[(r, k)] -= factor * v;
            }
            x[r] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for k in col + 1..n {
            acc -= m[(col, k)] * x[k];
        }
        x[col] = acc / m[(col, col)];
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterativeSolution {
    pub x: Vec<f64>,
    /// Index `n` of the step at which `‖x⁽ⁿ⁺¹⁾ − x⁽ⁿ⁾‖∞ < tol` first held.
    pub iterations: usize,
    /// `‖A x − b‖∞` at the returned iterate.
    pub residual: f64,
    /// Set when the dominance hypothesis failed on some row, so convergence
    /// was not guaranteed in advance.
    pub precondition_warning: bool,
}

/// Diagonal fixed-point iteration
/// `x⁽⁰⁾ = D⁻¹b`, `x⁽ⁿ⁺¹⁾ = x⁽ⁿ⁾ + D⁻¹(b − A x⁽ⁿ⁾)`.
pub fn solve_iterative(
    s: &LinearSystem,
    tol: f64,
    max_iter: usize,
) -> Result<IterativeSolution, LinalgError> {
    let a = s.matrix();
    let b = s.rhs();
    let diag = a.diagonal();
    let precondition_warning = kaykobad_dominates(s).iter().any(|r| !r.holds);

    let mut x: Vec<f64> = b.iter().zip(&diag).map(|(bi, d)| bi / d).collect();
    for n in 0..max_iter {
        let ax = a.mul_vec(&x);
        let next: Vec<f64> = x
            .iter()
            .zip(b.iter().zip(&ax))
            .zip(&diag)
            .map(|((xi, (bi, axi)), d)| xi + (bi - axi) / d)
            .collect();
        let step = x
            .iter()
            .zip(&next)
            .fold(0.0, |acc: f64, (p, q)| acc.max((p - q).abs()));
        x = next;
        if !step.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NotConverged {
                iterations: n + 1,
                residual: f64::INFINITY,
                last: x,
            });
        }
        if step < tol {
            let residual = residual_inf(a, &x, b);
            return Ok(IterativeSolution {
                x,
                iterations: n,
                residual,
                precondition_warning,
            });
        }
    }
    let residual = residual_inf(a, &x, b);
    Err(LinalgError::NotConverged {
        iterations: max_iter,
        residual,
        last: x,
    })
}

pub fn residual_inf(a: &Matrix, x: &[f64], b: &[f64]) -> f64 {
    a.mul_vec(x)
        .iter()
        .zip(b)
        .fold(0.0, |acc: f64, (p, q)| acc.max((p - q).abs()))
}

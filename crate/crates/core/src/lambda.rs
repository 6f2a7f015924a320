//! Log-linear parameters of a fitted `I×J×2×2` table.
//!
//! `log μ_ijkl` is split into a constant, main effects and two-way
//! interactions, each summing to zero over any one of its arguments.
//! Terms involving three or more variables are not part of the model
//! family and are dropped.
//!
//! A level of `Y1` whose nonresponse cells are all zero sends
//! `λ_Y1R1(i, 2)` to `-∞` while every other term stays finite; the same
//! holds for a level of `Y2` and `λ_Y2R2(j, 2)`. Any other zero pattern is
//! rejected.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::linalg::Matrix;
use crate::models::Cells;

/// Effect coding of the two missingness levels.
const E: [f64; 2] = [-1.0, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaDecomposition {
    pub constant: f64,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub r1: [f64; 2],
    pub r2: [f64; 2],
    /// `I×J`
    pub y1y2: Matrix,
    /// `I×2`
    pub y1r1: Matrix,
    /// `J×2`
    pub y2r1: Matrix,
    /// `I×2`
    pub y1r2: Matrix,
    /// `J×2`
    pub y2r2: Matrix,
    /// `2×2`
    pub r1r2: Matrix,
}

/// Two-way ANOVA of `x` restricted to the rows and columns marked usable.
/// Excluded rows and columns get zero effects.
struct Anova {
    grand: f64,
    row: Vec<f64>,
    col: Vec<f64>,
    inter: Matrix,
}

fn anova(x: &Matrix, row_ok: &[bool], col_ok: &[bool]) -> Anova {
    let (r, c) = (x.rows(), x.cols());
    let rows: Vec<usize> = (0..r).filter(|&i| row_ok[i]).collect();
    let cols: Vec<usize> = (0..c).filter(|&j| col_ok[j]).collect();
    let n = (rows.len() * cols.len()) as f64;
    let grand = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
        .map(|p| x[p])
        .sum::<f64>()
        / n;
    let mut row = vec![0.0; r];
    for &i in &rows {
        row[i] = cols.iter().map(|&j| x[(i, j)]).sum::<f64>() / cols.len() as f64 - grand;
    }
    let mut col = vec![0.0; c];
    for &j in &cols {
        col[j] = rows.iter().map(|&i| x[(i, j)]).sum::<f64>() / rows.len() as f64 - grand;
    }
    let mut inter = Matrix::zeros(r, c);
    for &i in &rows {
        for &j in &cols {
            inter[(i, j)] = x[(i, j)] - grand - row[i] - col[j];
        }
    }
    Anova {
        grand,
        row,
        col,
        inter,
    }
}

/// Zero cells of `layer` must fill whole rows (`by_row`) or whole columns.
fn zero_lines(layer: &Matrix, by_row: bool, term: &str) -> Result<Vec<bool>, ModelError> {
    let (outer, inner) = if by_row {
        (layer.rows(), layer.cols())
    } else {
        (layer.cols(), layer.rows())
    };
    let at = |o: usize, n: usize| if by_row { layer[(o, n)] } else { layer[(n, o)] };
    let mut zero = vec![false; outer];
    for (o, z) in zero.iter_mut().enumerate() {
        let zeros = (0..inner).filter(|&n| at(o, n) == 0.0).count();
        if zeros == inner {
            *z = true;
        } else if zeros > 0 {
            return Err(ModelError::InfiniteTerm(format!(
                "{term}: zero expected count in a partially positive {} {}",
                if by_row { "row" } else { "column" },
                o + 1
            )));
        }
    }
    if zero.iter().all(|&z| z) {
        return Err(ModelError::InfiniteTerm(format!(
            "{term}: every level has zero nonresponse"
        )));
    }
    Ok(zero)
}

pub fn lambda_decompose(mu: &Cells) -> Result<LambdaDecomposition, ModelError> {
    let (r, c) = (mu.rows(), mu.cols());
    for i in 0..r {
        for j in 0..c {
            for k in 0..2 {
                for l in 0..2 {
                    let v = mu.get(i, j, k, l);
                    if v < 0.0 || !v.is_finite() {
                        return Err(ModelError::NegativeMu {
                            i,
                            j,
                            k,
                            l,
                            value: v,
                        });
                    }
                }
            }
        }
    }
    let (m11, m12, m21, m22) = (
        mu.layer(0, 0),
        mu.layer(0, 1),
        mu.layer(1, 0),
        mu.layer(1, 1),
    );
    if m11.iter().any(|&v| v == 0.0) {
        return Err(ModelError::InfiniteTerm(
            "lambda_Y1Y2: zero fully observed expected count".into(),
        ));
    }
    let zero_a = zero_lines(m21, true, "lambda_Y1R1")?;
    let zero_b = zero_lines(m12, false, "lambda_Y2R2")?;
    for i in 0..r {
        for j in 0..c {
            let blocked = zero_a[i] || zero_b[j];
            if blocked != (m22[(i, j)] == 0.0) {
                return Err(ModelError::InfiniteTerm(format!(
                    "lambda_R1R2: both-missing cell ({},{}) inconsistent with the single-missing cells",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    let all_r = vec![true; r];
    let all_c = vec![true; c];
    let ok_a: Vec<bool> = zero_a.iter().map(|z| !z).collect();
    let ok_b: Vec<bool> = zero_b.iter().map(|z| !z).collect();

    let lm = m11.map(f64::ln);
    let la = Matrix::from_fn(r, c, |i, j| {
        if zero_a[i] {
            0.0
        } else {
            (m21[(i, j)] / m11[(i, j)]).ln()
        }
    });
    let lb = Matrix::from_fn(r, c, |i, j| {
        if zero_b[j] {
            0.0
        } else {
            (m12[(i, j)] / m11[(i, j)]).ln()
        }
    });
    let lg = Matrix::from_fn(r, c, |i, j| {
        if zero_a[i] || zero_b[j] {
            0.0
        } else {
            (m22[(i, j)] * m11[(i, j)] / (m21[(i, j)] * m12[(i, j)])).ln()
        }
    });
    let m = anova(&lm, &all_r, &all_c);
    let a = anova(&la, &ok_a, &all_c);
    let b = anova(&lb, &all_r, &ok_b);
    let g = anova(&lg, &ok_a, &ok_b);

    let y1: Vec<f64> = (0..r)
        .map(|i| m.row[i] + a.row[i] / 2.0 + b.row[i] / 2.0 + g.row[i] / 4.0)
        .collect();
    let y2: Vec<f64> = (0..c)
        .map(|j| m.col[j] + a.col[j] / 2.0 + b.col[j] / 2.0 + g.col[j] / 4.0)
        .collect();
    let y1y2 = Matrix::from_fn(r, c, |i, j| {
        m.inter[(i, j)] + a.inter[(i, j)] / 2.0 + b.inter[(i, j)] / 2.0 + g.inter[(i, j)] / 4.0
    });
    let y1r1 = Matrix::from_fn(r, 2, |i, k| match (zero_a[i], k) {
        (true, 0) => 0.0,
        (true, _) => f64::NEG_INFINITY,
        (false, _) => E[k] * (a.row[i] / 2.0 + g.row[i] / 4.0),
    });
    let y2r1 = Matrix::from_fn(c, 2, |j, k| E[k] * (a.col[j] / 2.0 + g.col[j] / 4.0));
    let y1r2 = Matrix::from_fn(r, 2, |i, l| E[l] * (b.row[i] / 2.0 + g.row[i] / 4.0));
    let y2r2 = Matrix::from_fn(c, 2, |j, l| match (zero_b[j], l) {
        (true, 0) => 0.0,
        (true, _) => f64::NEG_INFINITY,
        (false, _) => E[l] * (b.col[j] / 2.0 + g.col[j] / 4.0),
    });
    Ok(LambdaDecomposition {
        constant: m.grand + a.grand / 2.0 + b.grand / 2.0 + g.grand / 4.0,
        y1,
        y2,
        r1: [
            E[0] * (a.grand / 2.0 + g.grand / 4.0),
            E[1] * (a.grand / 2.0 + g.grand / 4.0),
        ],
        r2: [
            E[0] * (b.grand / 2.0 + g.grand / 4.0),
            E[1] * (b.grand / 2.0 + g.grand / 4.0),
        ],
        y1y2,
        y1r1,
        y2r1,
        y1r2,
        y2r2,
        r1r2: Matrix::from_fn(2, 2, |k, l| E[k] * E[l] * g.grand / 4.0),
    })
}

impl LambdaDecomposition {
    pub fn rows(&self) -> usize {
        self.y1.len()
    }

    pub fn cols(&self) -> usize {
        self.y2.len()
    }

    /// `log μ_ijkl` as the sum of every term.
    pub fn log_mu(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.constant
            + self.y1[i]
            + self.y2[j]
            + self.r1[k]
            + self.r2[l]
            + self.y1y2[(i, j)]
            + self.y1r1[(i, k)]
            + self.y2r1[(j, k)]
            + self.y1r2[(i, l)]
            + self.y2r2[(j, l)]
            + self.r1r2[(k, l)]
    }

    pub fn compose(&self) -> Cells {
        let (r, c) = (self.rows(), self.cols());
        let layer = |k, l| Matrix::from_fn(r, c, |i, j| self.log_mu(i, j, k, l).exp());
        Cells::new(layer(0, 0), layer(0, 1), layer(1, 0), layer(1, 1))
            .expect("layers share a shape")
    }

    /// Levels `i` with `λ_Y1R1(i, 2) = -∞`.
    pub fn infinite_y1r1(&self) -> Vec<usize> {
        (0..self.rows())
            .filter(|&i| self.y1r1[(i, 1)] == f64::NEG_INFINITY)
            .collect()
    }

    /// Levels `j` with `λ_Y2R2(j, 2) = -∞`.
    pub fn infinite_y2r2(&self) -> Vec<usize> {
        (0..self.cols())
            .filter(|&j| self.y2r2[(j, 1)] == f64::NEG_INFINITY)
            .collect()
    }
}

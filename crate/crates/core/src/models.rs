//! The five nonignorable models and their estimators.
//!
//! Expected counts are parameterised per cell as
//! `μ_ij11 = m_ij`, `μ_ij21 = m_ij a_ij`, `μ_ij12 = m_ij b_ij` and
//! `μ_ij22 = m_ij a_ij b_ij g`. A model fixes how the odds `a_ij` (for
//! `Y1` missing) and `b_ij` (for `Y2` missing) vary over the table.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, TableError};
use crate::linalg::Matrix;
use crate::table::{IncompleteTable, MarginSums};

/// How an odds parameter varies over the `I×J` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Constant,
    /// One value per level of `Y1`.
    ByRow,
    /// One value per level of `Y2`.
    ByCol,
}

impl Pattern {
    pub fn len(self, rows: usize, cols: usize) -> usize {
        match self {
            Pattern::Constant => 1,
            Pattern::ByRow => rows,
            Pattern::ByCol => cols,
        }
    }

    /// Index into the parameter vector for cell `(i, j)`.
    pub fn index(self, i: usize, j: usize) -> usize {
        match self {
            Pattern::Constant => 0,
            Pattern::ByRow => i,
            Pattern::ByCol => j,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelId {
    M1,
    M2,
    M3,
    M4,
    M5,
}

impl ModelId {
    pub const ALL: [ModelId; 5] = [
        ModelId::M1,
        ModelId::M2,
        ModelId::M3,
        ModelId::M4,
        ModelId::M5,
    ];

    /// Pattern of `a_ij`, the odds of `Y1` being missing.
    pub fn alpha_pattern(self) -> Pattern {
        match self {
            ModelId::M1 | ModelId::M3 | ModelId::M5 => Pattern::ByRow,
            ModelId::M2 => Pattern::Constant,
            ModelId::M4 => Pattern::ByCol,
        }
    }

    /// Pattern of `b_ij`, the odds of `Y2` being missing.
    pub fn beta_pattern(self) -> Pattern {
        match self {
            ModelId::M2 | ModelId::M4 | ModelId::M5 => Pattern::ByCol,
            ModelId::M1 => Pattern::Constant,
            ModelId::M3 => Pattern::ByRow,
        }
    }

    /// Missingness of `Y1` depends on `Y1` itself.
    pub fn nmar_alpha(self) -> bool {
        self.alpha_pattern() == Pattern::ByRow
    }

    /// Missingness of `Y2` depends on `Y2` itself.
    pub fn nmar_beta(self) -> bool {
        self.beta_pattern() == Pattern::ByCol
    }

    /// Every estimated count equals its observed counterpart when interior.
    pub fn is_perfect_fit(self) -> bool {
        matches!(self, ModelId::M3 | ModelId::M4 | ModelId::M5)
    }

    pub fn tag(self) -> &'static str {
        match self {
            ModelId::M1 => "M1",
            ModelId::M2 => "M2",
            ModelId::M3 => "M3",
            ModelId::M4 => "M4",
            ModelId::M5 => "M5",
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ModelId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown model {s:?}; expected one of m1..m5"))
    }
}

/// Odds estimates laid out according to a [`Pattern`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsVector {
    pub pattern: Pattern,
    pub values: Vec<f64>,
}

impl OddsVector {
    pub fn constant(v: f64) -> Self {
        Self {
            pattern: Pattern::Constant,
            values: vec![v],
        }
    }

    pub fn by_row(values: Vec<f64>) -> Self {
        Self {
            pattern: Pattern::ByRow,
            values,
        }
    }

    pub fn by_col(values: Vec<f64>) -> Self {
        Self {
            pattern: Pattern::ByCol,
            values,
        }
    }

    /// Value of the odds at cell `(i, j)`.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.pattern.index(i, j)]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check(
        &self,
        expected: Pattern,
        rows: usize,
        cols: usize,
        name: &str,
    ) -> Result<(), ModelError> {
        if self.pattern != expected {
            return Err(ModelError::Shape(format!(
                "{name} has pattern {:?}, model requires {expected:?}",
                self.pattern
            )));
        }
        let n = expected.len(rows, cols);
        if self.values.len() != n {
            return Err(ModelError::Shape(format!(
                "{name} has {} values, expected {n}",
                self.values.len()
            )));
        }
        Ok(())
    }
}

/// The four `I×J` layers of expected counts.
///
/// Layer `(k, l)` uses 0-based missingness indices: `(0, 0)` is fully
/// observed, `(1, 0)` has `Y1` missing, `(0, 1)` has `Y2` missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cells {
    layers: [Matrix; 4],
}

impl Cells {
    /// Layers in the order `11, 12, 21, 22`.
    pub fn new(mu11: Matrix, mu12: Matrix, mu21: Matrix, mu22: Matrix) -> Result<Self, ModelError> {
        let (r, c) = (mu11.rows(), mu11.cols());
        if [&mu12, &mu21, &mu22]
            .iter()
            .any(|m| m.rows() != r || m.cols() != c)
        {
            return Err(ModelError::Shape("cell layers differ in shape".into()));
        }
        Ok(Self {
            layers: [mu11, mu12, mu21, mu22],
        })
    }

    pub fn rows(&self) -> usize {
        self.layers[0].rows()
    }

    pub fn cols(&self) -> usize {
        self.layers[0].cols()
    }

    pub fn layer(&self, k: usize, l: usize) -> &Matrix {
        &self.layers[2 * k + l]
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.layer(k, l)[(i, j)]
    }

    pub fn total(&self) -> f64 {
        self.layers.iter().map(Matrix::sum).sum()
    }

    /// Every negative expected count, in `(i, j, k, l)` order.
    pub fn negative_entries(&self) -> Vec<ModelError> {
        let mut out = Vec::new();
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                for k in 0..2 {
                    for l in 0..2 {
                        let v = self.get(i, j, k, l);
                        if v < 0.0 {
                            out.push(ModelError::NegativeMu {
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
        out
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            layers: self.layers.clone().map(|m| m.map(|v| v * c)),
        }
    }
}

/// Fitted parameters together with the expected counts they imply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEstimates {
    pub m11: Matrix,
    pub alpha: OddsVector,
    pub beta: OddsVector,
    #[serde(with = "crate::serde_float")]
    pub g: f64,
    pub mu: Cells,
}

impl CellEstimates {
    pub fn assemble(
        m11: Matrix,
        alpha: OddsVector,
        beta: OddsVector,
        g: f64,
        model: ModelId,
    ) -> Result<Self, ModelError> {
        let mu = reconstruct_cells(&m11, &alpha, &beta, g, model)?;
        Ok(Self {
            m11,
            alpha,
            beta,
            g,
            mu,
        })
    }
}

/// Response-cell estimates `m̂_ij11` of a model away from the boundary.
pub fn closed_form_m11(t: &IncompleteTable, model: ModelId) -> Result<Matrix, TableError> {
    t.require_strict()?;
    let s = t.margins();
    let y = t.y11_matrix();
    Ok(match model {
        ModelId::M1 => {
            let scale = s.total_11 as f64 / s.total_1x as f64;
            Matrix::from_fn(t.rows(), t.cols(), |i, j| {
                y[(i, j)] * s.row_1x[i] as f64 / s.row_11[i] as f64 * scale
            })
        }
        ModelId::M2 => {
            let scale = s.total_11 as f64 / s.total_x1 as f64;
            Matrix::from_fn(t.rows(), t.cols(), |i, j| {
                y[(i, j)] * s.col_x1[j] as f64 / s.col_11[j] as f64 * scale
            })
        }
        ModelId::M3 | ModelId::M4 | ModelId::M5 => y,
    })
}

/// `ĝ = y_++11 y_++22 / (y_++12 y_++21)`.
pub fn estimate_g(t: &IncompleteTable) -> Result<f64, ModelError> {
    g_from_margins(&t.margins())
}

pub fn g_from_margins(s: &MarginSums) -> Result<f64, ModelError> {
    if s.total_12 == 0 {
        return Err(ModelError::UndefinedG("y_++12 = 0".into()));
    }
    if s.total_21 == 0 {
        return Err(ModelError::UndefinedG("y_++21 = 0".into()));
    }
    Ok(s.total_11 as f64 * s.total_22 as f64 / (s.total_12 as f64 * s.total_21 as f64))
}

/// `β̂_.. = y_++12 / y_++11`.
pub fn estimate_constant_beta(t: &IncompleteTable) -> f64 {
    let s = t.margins();
    s.total_12 as f64 / s.total_11 as f64
}

/// `α̂_.. = y_++21 / y_++11`.
pub fn estimate_constant_alpha(t: &IncompleteTable) -> f64 {
    let s = t.margins();
    s.total_21 as f64 / s.total_11 as f64
}

/// Expands `m11`, the odds and `g` into all four layers of expected counts.
pub fn reconstruct_cells(
    m11: &Matrix,
    alpha: &OddsVector,
    beta: &OddsVector,
    g: f64,
    model: ModelId,
) -> Result<Cells, ModelError> {
    let (r, c) = (m11.rows(), m11.cols());
    alpha.check(model.alpha_pattern(), r, c, "alpha")?;
    beta.check(model.beta_pattern(), r, c, "beta")?;
    let mu12 = Matrix::from_fn(r, c, |i, j| m11[(i, j)] * beta.at(i, j));
    let mu21 = Matrix::from_fn(r, c, |i, j| m11[(i, j)] * alpha.at(i, j));
    let mu22 = Matrix::from_fn(r, c, |i, j| {
        m11[(i, j)] * alpha.at(i, j) * beta.at(i, j) * g
    });
    Cells::new(m11.clone(), mu12, mu21, mu22)
}

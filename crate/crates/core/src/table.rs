//! Observed counts of an `I×J×2×2` incomplete table.
//!
//! Only four pieces of the full table are ever observed: the fully
//! classified cells `y_ij11`, the row margin `y_i+12` of records missing
//! `Y2`, the column margin `y_+j21` of records missing `Y1`, and the single
//! count `y_++22` of records missing both.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::TableError;
use crate::linalg::Matrix;

/// How much of the positivity invariant to enforce on `y11`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Validation {
    /// Every `y_ij11 > 0`. Required by all estimators.
    #[default]
    Strict,
    /// Zero cells allowed in `y11`; only parsing and margins are meaningful.
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    /// Grid layout; `header` skips a leading header row.
    Csv {
        header: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncompleteTable {
    rows: usize,
    cols: usize,
    y11: Vec<u64>,
    y12: Vec<u64>,
    y21: Vec<u64>,
    y22: u64,
    total: u64,
}

/// Wire layout shared by parsing and serialization.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable<T> {
    #[serde(rename = "I")]
    rows: i64,
    #[serde(rename = "J")]
    cols: i64,
    y11: Vec<Vec<T>>,
    y12: Vec<T>,
    y21: Vec<T>,
    y22: T,
}

fn to_count(v: i64, location: impl FnOnce() -> String) -> Result<u64, TableError> {
    u64::try_from(v).map_err(|_| TableError::NegativeCount {
        location: location(),
        value: v,
    })
}

impl IncompleteTable {
    /// Validates and builds a table. `y11` is given as rows.
    pub fn new(
        y11: Vec<Vec<u64>>,
        y12: Vec<u64>,
        y21: Vec<u64>,
        y22: u64,
        validation: Validation,
    ) -> Result<Self, TableError> {
        let rows = y11.len();
        let cols = y11.first().map_or(0, Vec::len);
        if rows < 2 || cols < 2 {
            return Err(TableError::Dimension(format!(
                "need at least 2 levels per variable, got {rows}x{cols}"
            )));
        }
        if let Some((i, r)) = y11.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(TableError::Dimension(format!(
                "y11 row {} has {} entries, expected {cols}",
                i + 1,
                r.len()
            )));
        }
        if y12.len() != rows {
            return Err(TableError::Dimension(format!(
                "y12 has {} entries, expected I = {rows}",
                y12.len()
            )));
        }
        if y21.len() != cols {
            return Err(TableError::Dimension(format!(
                "y21 has {} entries, expected J = {cols}",
                y21.len()
            )));
        }
        if let Some(i) = y12.iter().position(|&v| v == 0) {
            return Err(TableError::ZeroMargin {
                margin: format!("y_{}+12", i + 1),
            });
        }
        if let Some(j) = y21.iter().position(|&v| v == 0) {
            return Err(TableError::ZeroMargin {
                margin: format!("y_+{}21", j + 1),
            });
        }
        if y22 == 0 {
            return Err(TableError::ZeroMargin {
                margin: "y_++22".into(),
            });
        }
        let y11: Vec<u64> = y11.into_iter().flatten().collect();
        if validation == Validation::Strict {
            if let Some(p) = y11.iter().position(|&v| v == 0) {
                return Err(TableError::ZeroCell {
                    row: p / cols,
                    col: p % cols,
                });
            }
        }
        let total =
            y11.iter().sum::<u64>() + y12.iter().sum::<u64>() + y21.iter().sum::<u64>() + y22;
        Ok(Self {
            rows,
            cols,
            y11,
            y12,
            y21,
            y22,
            total,
        })
    }

    pub fn parse(
        mut source: impl Read,
        format: Format,
        validation: Validation,
    ) -> Result<Self, TableError> {
        let mut text = String::new();
        source.read_to_string(&mut text)?;
        match format {
            Format::Json => Self::from_json_str(&text, validation),
            Format::Csv { header } => Self::from_csv_str(&text, header, validation),
        }
    }

    pub fn from_json_str(text: &str, validation: Validation) -> Result<Self, TableError> {
        let raw: RawTable<i64> =
            serde_json::from_str(text).map_err(|e| TableError::Malformed(e.to_string()))?;
        let y11 = raw
            .y11
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.iter()
                    .enumerate()
                    .map(|(j, &v)| to_count(v, || format!("y11[{}][{}]", i + 1, j + 1)))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let y12 = raw
            .y12
            .iter()
            .enumerate()
            .map(|(i, &v)| to_count(v, || format!("y12[{}]", i + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        let y21 = raw
            .y21
            .iter()
            .enumerate()
            .map(|(j, &v)| to_count(v, || format!("y21[{}]", j + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        let y22 = to_count(raw.y22, || "y22".into())?;
        if raw.rows != y11.len() as i64 {
            return Err(TableError::Dimension(format!(
                "I = {} but y11 has {} rows",
                raw.rows,
                y11.len()
            )));
        }
        if let Some(r) = y11.iter().find(|r| r.len() as i64 != raw.cols) {
            return Err(TableError::Dimension(format!(
                "J = {} but a y11 row has {} entries",
                raw.cols,
                r.len()
            )));
        }
        Self::new(y11, y12, y21, y22, validation)
    }

    /// `(I+1)×(J+1)` grid: body rows are `y11` followed by `y_i+12`; the last
    /// row is `y_+j21` followed by `y_++22`.
    pub fn from_csv_str(
        text: &str,
        header: bool,
        validation: Validation,
    ) -> Result<Self, TableError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(header)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());
        let mut grid: Vec<Vec<i64>> = Vec::new();
        for (r, record) in reader.records().enumerate() {
            let record = record.map_err(|e| TableError::Malformed(e.to_string()))?;
            if record.iter().all(str::is_empty) {
                continue;
            }
            let row = record
                .iter()
                .enumerate()
                .map(|(c, field)| {
                    field.parse::<i64>().map_err(|_| {
                        TableError::Malformed(format!(
                            "row {}, column {}: {field:?} is not an integer count",
                            r + 1,
                            c + 1
                        ))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            grid.push(row);
        }
        if grid.len() < 3 {
            return Err(TableError::Dimension(format!(
                "csv grid needs at least 3 rows, found {}",
                grid.len()
            )));
        }
        let width = grid[0].len();
        if width < 3 {
            return Err(TableError::Dimension(format!(
                "csv grid needs at least 3 columns, found {width}"
            )));
        }
        if let Some((r, row)) = grid.iter().enumerate().find(|(_, row)| row.len() != width) {
            return Err(TableError::Dimension(format!(
                "csv row {} has {} fields, expected {width}",
                r + 1,
                row.len()
            )));
        }
        let rows = grid.len() - 1;
        let cols = width - 1;
        let mut y11 = Vec::with_capacity(rows);
        let mut y12 = Vec::with_capacity(rows);
        for (i, row) in grid[..rows].iter().enumerate() {
            y11.push(
                row[..cols]
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| to_count(v, || format!("y11[{}][{}]", i + 1, j + 1)))
                    .collect::<Result<Vec<_>, _>>()?,
            );
            y12.push(to_count(row[cols], || format!("y12[{}]", i + 1))?);
        }
        let last = &grid[rows];
        let y21 = last[..cols]
            .iter()
            .enumerate()
            .map(|(j, &v)| to_count(v, || format!("y21[{}]", j + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        let y22 = to_count(last[cols], || "y22".into())?;
        Self::new(y11, y12, y21, y22, validation)
    }

    pub fn to_json_string(&self) -> String {
        let raw = RawTable {
            rows: self.rows as i64,
            cols: self.cols as i64,
            y11: self.y11_rows(),
            y12: self.y12.clone(),
            y21: self.y21.clone(),
            y22: self.y22,
        };
        serde_json::to_string(&raw).expect("table serialization cannot fail")
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let join = |vals: &mut dyn Iterator<Item = u64>| {
            vals.map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        };
        for i in 0..self.rows {
            let mut it = self
                .row(i)
                .iter()
                .copied()
                .chain(std::iter::once(self.y12[i]));
            out.push_str(&join(&mut it));
            out.push('\n');
        }
        let mut it = self.y21.iter().copied().chain(std::iter::once(self.y22));
        out.push_str(&join(&mut it));
        out.push('\n');
        out
    }

    /// Number of levels of `Y1`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of levels of `Y2`.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn y11(&self, i: usize, j: usize) -> u64 {
        self.y11[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.y11[i * self.cols..(i + 1) * self.cols]
    }

    pub fn y11_rows(&self) -> Vec<Vec<u64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn y11_matrix(&self) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| self.y11(i, j) as f64)
    }

    /// `y_i+12`.
    pub fn y12(&self) -> &[u64] {
        &self.y12
    }

    /// `y_+j21`.
    pub fn y21(&self) -> &[u64] {
        &self.y21
    }

    /// `y_++22`.
    pub fn y22(&self) -> u64 {
        self.y22
    }

    /// `N`, the sum of every observed count.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_strict(&self) -> bool {
        self.y11.iter().all(|&v| v > 0)
    }

    pub fn require_strict(&self) -> Result<(), TableError> {
        match self.y11.iter().position(|&v| v == 0) {
            Some(p) => Err(TableError::ZeroCell {
                row: p / self.cols,
                col: p % self.cols,
            }),
            None => Ok(()),
        }
    }

    pub fn margins(&self) -> MarginSums {
        MarginSums::of(self)
    }
}

/// Sums of observed counts; `+` in a subscript denotes summation over that
/// index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarginSums {
    /// `y_i+11`
    pub row_11: Vec<u64>,
    /// `y_+j11`
    pub col_11: Vec<u64>,
    /// `y_++11`
    pub total_11: u64,
    /// `y_i+1+ = y_i+11 + y_i+12`
    pub row_1x: Vec<u64>,
    /// `y_+j+1 = y_+j11 + y_+j21`
    pub col_x1: Vec<u64>,
    /// `y_++12`
    pub total_12: u64,
    /// `y_++21`
    pub total_21: u64,
    /// `y_++22`
    pub total_22: u64,
    /// `y_++1+ = y_++11 + y_++12`
    pub total_1x: u64,
    /// `y_+++1 = y_++11 + y_++21`
    pub total_x1: u64,
}

impl MarginSums {
    fn of(t: &IncompleteTable) -> Self {
        let row_11: Vec<u64> = (0..t.rows()).map(|i| t.row(i).iter().sum()).collect();
        let col_11: Vec<u64> = (0..t.cols())
            .map(|j| (0..t.rows()).map(|i| t.y11(i, j)).sum())
            .collect();
        let total_11: u64 = row_11.iter().sum();
        let total_12: u64 = t.y12().iter().sum();
        let total_21: u64 = t.y21().iter().sum();
        Self {
            row_1x: row_11.iter().zip(t.y12()).map(|(a, b)| a + b).collect(),
            col_x1: col_11.iter().zip(t.y21()).map(|(a, b)| a + b).collect(),
            row_11,
            col_11,
            total_11,
            total_12,
            total_21,
            total_22: t.y22(),
            total_1x: total_11 + total_12,
            total_x1: total_11 + total_21,
        }
    }
}

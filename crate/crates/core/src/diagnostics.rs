//! Boundary diagnostics.
//!
//! Three layers, from cheapest to most expensive:
//! odds conditions on the observed counts that guarantee a boundary,
//! dominance conditions whose failure rules one out, and a report of the
//! boundary actually reached by a fit.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DiagnosticError, TableError};
use crate::fitting::FitResult;
use crate::lambda::lambda_decompose;
use crate::linalg::{kaykobad_dominates, LinearSystem};
use crate::models::{closed_form_m11, ModelId};
use crate::table::IncompleteTable;

/// Odds between two levels of one variable, at every level of the other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOdds {
    pub first: usize,
    pub second: usize,
    /// Fully observed odds, one per level of the other variable.
    #[serde(with = "crate::serde_float::vec")]
    pub response: Vec<f64>,
    #[serde(with = "crate::serde_float")]
    pub min: f64,
    /// First level attaining `min`.
    pub argmin: usize,
    #[serde(with = "crate::serde_float")]
    pub max: f64,
    /// First level attaining `max`.
    pub argmax: usize,
    /// Odds in the supplementary margin.
    #[serde(with = "crate::serde_float")]
    pub nonresponse: f64,
    /// `nonresponse` lies strictly inside `(min, max)`.
    pub inside: bool,
}

impl PairOdds {
    fn new(first: usize, second: usize, response: Vec<f64>, nonresponse: f64) -> Self {
        let mut argmin = 0;
        let mut argmax = 0;
        for (k, &v) in response.iter().enumerate() {
            if v < response[argmin] {
                argmin = k;
            }
            if v > response[argmax] {
                argmax = k;
            }
        }
        let (min, max) = (response[argmin], response[argmax]);
        Self {
            first,
            second,
            response,
            min,
            argmin,
            max,
            argmax,
            nonresponse,
            inside: min < nonresponse && nonresponse < max,
        }
    }
}

/// `ν_i(j, j') = y_ij11 / y_ij'11` against `ν(j, j') = y_+j21 / y_+j'21`.
pub fn y2_pair_odds(t: &IncompleteTable, j: usize, jp: usize) -> PairOdds {
    let response = (0..t.rows())
        .map(|i| t.y11(i, j) as f64 / t.y11(i, jp) as f64)
        .collect();
    PairOdds::new(j, jp, response, t.y21()[j] as f64 / t.y21()[jp] as f64)
}

/// `ω_j(i, i') = y_ij11 / y_i'j11` against `ω(i, i') = y_i+12 / y_i'+12`.
pub fn y1_pair_odds(t: &IncompleteTable, i: usize, ip: usize) -> PairOdds {
    let response = (0..t.cols())
        .map(|j| t.y11(i, j) as f64 / t.y11(ip, j) as f64)
        .collect();
    PairOdds::new(i, ip, response, t.y12()[i] as f64 / t.y12()[ip] as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsProfile {
    pub rows: usize,
    pub cols: usize,
    /// Pairs `j < j'` of `Y2` levels.
    pub nu: Vec<PairOdds>,
    /// Pairs `i < i'` of `Y1` levels.
    pub omega: Vec<PairOdds>,
}

pub fn odds_profile(t: &IncompleteTable) -> Result<OddsProfile, TableError> {
    t.require_strict()?;
    let pairs = |n: usize| (0..n).flat_map(move |a| (a + 1..n).map(move |b| (a, b)));
    Ok(OddsProfile {
        rows: t.rows(),
        cols: t.cols(),
        nu: pairs(t.cols())
            .map(|(j, jp)| y2_pair_odds(t, j, jp))
            .collect(),
        omega: pairs(t.rows())
            .map(|(i, ip)| y1_pair_odds(t, i, ip))
            .collect(),
    })
}

/// What the diagnostics can promise about a model before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Guarantee {
    BoundaryCertain,
    NoBoundaryCertain,
    Undetermined,
}

impl fmt::Display for Guarantee {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Guarantee::BoundaryCertain => "boundary certain",
            Guarantee::NoBoundaryCertain => "no boundary certain",
            Guarantee::Undetermined => "undetermined",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SufficientVerdict {
    pub model: ModelId,
    pub flagged: bool,
    pub guarantee: Guarantee,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficientConditions {
    /// `Y2` pairs whose nonresponse odds fall outside the open interval.
    pub condition1_pairs: Vec<(usize, usize)>,
    /// `Y1` pairs whose nonresponse odds fall outside the open interval.
    pub condition2_pairs: Vec<(usize, usize)>,
    pub condition1: bool,
    pub condition2: bool,
    pub verdicts: Vec<SufficientVerdict>,
    /// The guarantee is established for square tables only.
    pub in_scope: bool,
    pub scope_note: Option<String>,
}

/// Which odds condition a model's boundary depends on.
pub fn sufficient_flag(model: ModelId, condition1: bool, condition2: bool) -> bool {
    match model {
        ModelId::M1 | ModelId::M3 => condition1,
        ModelId::M2 | ModelId::M4 => condition2,
        ModelId::M5 => condition1 || condition2,
    }
}

pub fn sufficient_conditions(p: &OddsProfile) -> SufficientConditions {
    let outside = |v: &[PairOdds]| {
        v.iter()
            .filter(|o| !o.inside)
            .map(|o| (o.first, o.second))
            .collect::<Vec<_>>()
    };
    let condition1_pairs = outside(&p.nu);
    let condition2_pairs = outside(&p.omega);
    let (c1, c2) = (!condition1_pairs.is_empty(), !condition2_pairs.is_empty());
    let verdicts = ModelId::ALL
        .into_iter()
        .map(|model| {
            let flagged = sufficient_flag(model, c1, c2);
            SufficientVerdict {
                model,
                flagged,
                guarantee: if flagged {
                    Guarantee::BoundaryCertain
                } else {
                    Guarantee::Undetermined
                },
            }
        })
        .collect();
    let in_scope = p.rows == p.cols;
    SufficientConditions {
        condition1_pairs,
        condition2_pairs,
        condition1: c1,
        condition2: c2,
        verdicts,
        in_scope,
        scope_note: (!in_scope).then(|| {
            format!(
                "table is {}x{}: the odds guarantee covers square tables only",
                p.rows, p.cols
            )
        }),
    }
}

/// One inequality `lhs ≤ rhs` of a dominance condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub at_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEval {
    pub rows: Vec<ConditionRow>,
    /// At least one row holds.
    pub holds: bool,
}

fn evaluate(s: &LinearSystem) -> ConditionEval {
    let rows: Vec<ConditionRow> = kaykobad_dominates(s)
        .into_iter()
        .map(|d| ConditionRow {
            index: d.row,
            lhs: d.lhs,
            rhs: d.rhs,
            holds: !d.holds,
            at_boundary: d.at_boundary,
        })
        .collect();
    let holds = rows.iter().any(|r| r.holds);
    ConditionEval { rows, holds }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessaryConditions {
    pub model: ModelId,
    /// `y_+j21 ≤ Σ_{i≠j} μ̂_ij11 y_+i21 / μ̂_ii11`; present for models with
    /// nonignorable `α`.
    pub condition1: Option<ConditionEval>,
    /// `y_i+12 ≤ Σ_{j≠i} μ̂_ij11 y_j+12 / μ̂_jj11`; present for models with
    /// nonignorable `β`.
    pub condition2: Option<ConditionEval>,
    /// The condition a boundary under this model would require.
    pub satisfied: bool,
    pub guarantee: Guarantee,
}

pub fn necessary_conditions(
    t: &IncompleteTable,
    model: ModelId,
) -> Result<NecessaryConditions, DiagnosticError> {
    if !t.is_square() {
        return Err(DiagnosticError::NotApplicable(format!(
            "dominance conditions need a square table (I≠J: {}x{})",
            t.rows(),
            t.cols()
        )));
    }
    let m11 = closed_form_m11(t, model)?;
    let system = |a, b: &[u64]| {
        LinearSystem::new(a, b.iter().map(|&v| v as f64).collect())
            .expect("positive cells and margins meet the dominance hypotheses")
    };
    let condition1 = model
        .nmar_alpha()
        .then(|| evaluate(&system(m11.transpose(), t.y21())));
    let condition2 = model
        .nmar_beta()
        .then(|| evaluate(&system(m11.clone(), t.y12())));
    let satisfied = sufficient_flag(
        model,
        condition1.as_ref().is_some_and(|c| c.holds),
        condition2.as_ref().is_some_and(|c| c.holds),
    );
    Ok(NecessaryConditions {
        model,
        condition1,
        condition2,
        satisfied,
        guarantee: if satisfied {
            Guarantee::Undetermined
        } else {
            Guarantee::NoBoundaryCertain
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variable {
    Y1,
    Y2,
}

/// One zeroed level in its three equivalent forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryForm {
    pub variable: Variable,
    pub level: usize,
    /// `α̂_i.` or `β̂_.j`.
    pub odds: f64,
    /// `π̂_i+2+` or `π̂_+j+2`.
    pub probability: f64,
    /// `λ̂_Y1R1(i, 2)` or `λ̂_Y2R2(j, 2)`.
    #[serde(with = "crate::serde_float")]
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub model: ModelId,
    pub boundary: bool,
    pub alpha_zero: Vec<usize>,
    pub beta_zero: Vec<usize>,
    pub forms: Vec<BoundaryForm>,
}

/// Reads the boundary off a feasible fit and checks that the odds,
/// probability and log-linear forms agree level by level. A level is on the
/// boundary when its odds are at most `tol`; the other two forms must then
/// vanish to `tol` as well, and must stay strictly positive and finite
/// otherwise.
pub fn boundary_report(f: &FitResult, tol: f64) -> Result<BoundaryReport, DiagnosticError> {
    let e = &f.estimates;
    let mu = &e.mu;
    if !mu.negative_entries().is_empty() {
        return Err(DiagnosticError::NotApplicable(
            "estimates contain negative expected counts".into(),
        ));
    }
    let n = mu.total();
    let lam = lambda_decompose(mu)?;
    let (r, c) = (mu.rows(), mu.cols());
    let mut forms = Vec::new();
    let mut scan = |variable: Variable,
                    levels: usize,
                    other: usize|
     -> Result<Vec<usize>, DiagnosticError> {
        let mut zero = Vec::new();
        for v in 0..levels {
            let (odds, probability, lambda, implied) = match variable {
                Variable::Y1 => (
                    e.alpha.values[v],
                    (0..other)
                        .map(|j| mu.get(v, j, 1, 0) + mu.get(v, j, 1, 1))
                        .sum::<f64>()
                        / n,
                    lam.y1r1[(v, 1)],
                    (0..other)
                        .map(|j| (lam.log_mu(v, j, 1, 0) - lam.log_mu(v, j, 0, 0)).exp())
                        .fold(0.0, f64::max),
                ),
                Variable::Y2 => (
                    e.beta.values[v],
                    (0..other)
                        .map(|i| mu.get(i, v, 0, 1) + mu.get(i, v, 1, 1))
                        .sum::<f64>()
                        / n,
                    lam.y2r2[(v, 1)],
                    (0..other)
                        .map(|i| (lam.log_mu(i, v, 0, 1) - lam.log_mu(i, v, 0, 0)).exp())
                        .fold(0.0, f64::max),
                ),
            };
            let by_odds = odds <= tol;
            let agree = if by_odds {
                probability <= tol && (lambda == f64::NEG_INFINITY || implied <= tol)
            } else {
                probability > 0.0 && lambda.is_finite()
            };
            if !agree {
                return Err(DiagnosticError::Inconsistent {
                    variable: match variable {
                        Variable::Y1 => "Y1",
                        Variable::Y2 => "Y2",
                    },
                    level: v + 1,
                    detail: format!("odds {odds:e}, probability {probability:e}, lambda {lambda}"),
                });
            }
            if by_odds {
                zero.push(v);
                forms.push(BoundaryForm {
                    variable,
                    level: v,
                    odds,
                    probability,
                    lambda,
                });
            }
        }
        if zero.len() == levels {
            return Err(DiagnosticError::Inconsistent {
                variable: match variable {
                    Variable::Y1 => "Y1",
                    Variable::Y2 => "Y2",
                },
                level: levels,
                detail: "every level is on the boundary".into(),
            });
        }
        Ok(zero)
    };
    let alpha_zero = if f.model.nmar_alpha() {
        scan(Variable::Y1, r, c)?
    } else {
        vec![]
    };
    let beta_zero = if f.model.nmar_beta() {
        scan(Variable::Y2, c, r)?
    } else {
        vec![]
    };
    Ok(BoundaryReport {
        model: f.model,
        boundary: !alpha_zero.is_empty() || !beta_zero.is_empty(),
        alpha_zero,
        beta_zero,
        forms,
    })
}

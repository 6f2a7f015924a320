//! Analysis and check reports: fits and diagnostics for one table gathered
//! into a single serializable record, with the per-model verdicts.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    necessary_conditions, odds_profile, sufficient_conditions, Guarantee, NecessaryConditions,
    OddsProfile, SufficientConditions, SufficientVerdict,
};
use crate::error::{DiagnosticError, FitError};
use crate::fitting::{fit_with_boundary, BoundaryOptions, FitResult};
use crate::models::ModelId;
use crate::table::IncompleteTable;

/// Version tag carried by every report.
pub const SCHEMA: &str = "boundary-scan/1";

/// The analysed table, echoed with its grand total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputEcho {
    #[serde(rename = "I")]
    pub rows: usize,
    #[serde(rename = "J")]
    pub cols: usize,
    pub y11: Vec<Vec<u64>>,
    pub y12: Vec<u64>,
    pub y21: Vec<u64>,
    pub y22: u64,
    #[serde(rename = "N")]
    pub total: u64,
}

impl InputEcho {
    pub fn new(t: &IncompleteTable) -> Self {
        Self {
            rows: t.rows(),
            cols: t.cols(),
            y11: t.y11_rows(),
            y12: t.y12().to_vec(),
            y21: t.y21().to_vec(),
            y22: t.y22(),
            total: t.total(),
        }
    }
}

/// Outcome of a fit read against what the diagnostics promised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "boundary certain, boundary occurred")]
    BoundaryConfirmed,
    #[serde(rename = "no boundary certain, no boundary")]
    InteriorConfirmed,
    #[serde(rename = "no guarantee, boundary occurred")]
    BoundaryUnguaranteed,
    #[serde(rename = "no guarantee, no boundary")]
    InteriorUnguaranteed,
    /// The fit contradicts a guarantee.
    #[serde(rename = "contradiction")]
    Contradiction,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::BoundaryConfirmed => "boundary certain, boundary occurred",
            Verdict::InteriorConfirmed => "no boundary certain, no boundary",
            Verdict::BoundaryUnguaranteed => "no guarantee, boundary occurred",
            Verdict::InteriorUnguaranteed => "no guarantee, no boundary",
            Verdict::Contradiction => "contradiction",
        })
    }
}

/// Joins the two guarantees for one model. `None` means the conditions were
/// not evaluated or do not apply.
pub fn combine(
    sufficient: Option<&SufficientVerdict>,
    necessary: Option<&NecessaryConditions>,
) -> Option<Guarantee> {
    let certain = sufficient.is_some_and(|s| s.guarantee == Guarantee::BoundaryCertain);
    let excluded = necessary.is_some_and(|n| n.guarantee == Guarantee::NoBoundaryCertain);
    match (certain, excluded) {
        (true, true) => None,
        (true, false) => Some(Guarantee::BoundaryCertain),
        (false, true) => Some(Guarantee::NoBoundaryCertain),
        (false, false) => Some(Guarantee::Undetermined),
    }
}

/// `guarantee` is `None` when the two guarantees conflict.
pub fn verdict(guarantee: Option<Guarantee>, boundary: bool) -> Verdict {
    match (guarantee, boundary) {
        (Some(Guarantee::BoundaryCertain), true) => Verdict::BoundaryConfirmed,
        (Some(Guarantee::NoBoundaryCertain), false) => Verdict::InteriorConfirmed,
        (Some(Guarantee::Undetermined), true) => Verdict::BoundaryUnguaranteed,
        (Some(Guarantee::Undetermined), false) => Verdict::InteriorUnguaranteed,
        _ => Verdict::Contradiction,
    }
}

/// Odds tables and the verdicts drawn from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficientSection {
    pub odds: OddsProfile,
    pub conditions: SufficientConditions,
}

impl SufficientSection {
    pub fn new(t: &IncompleteTable) -> Result<Self, DiagnosticError> {
        let odds = odds_profile(t)?;
        let conditions = sufficient_conditions(&odds);
        Ok(Self { odds, conditions })
    }

    /// The verdict for `model`, or `None` outside the guarantee's scope.
    pub fn verdict(&self, model: ModelId) -> Option<&SufficientVerdict> {
        if !self.conditions.in_scope {
            return None;
        }
        self.conditions.verdicts.iter().find(|v| v.model == model)
    }
}

/// Dominance conditions for one model, or the reason they do not apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessarySection {
    pub model: ModelId,
    pub applicable: bool,
    pub note: Option<String>,
    pub conditions: Option<NecessaryConditions>,
}

impl NecessarySection {
    pub fn new(t: &IncompleteTable, model: ModelId) -> Result<Self, DiagnosticError> {
        match necessary_conditions(t, model) {
            Ok(c) => Ok(Self {
                model,
                applicable: true,
                note: None,
                conditions: Some(c),
            }),
            Err(DiagnosticError::NotApplicable(note)) => Ok(Self {
                model,
                applicable: false,
                note: Some(note),
                conditions: None,
            }),
            Err(e) => Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBlock {
    pub model: ModelId,
    pub fit: FitResult,
    pub necessary: NecessarySection,
    /// `None` outside the sufficient condition's scope.
    pub sufficient: Option<SufficientVerdict>,
    /// `None` when the sufficient and necessary guarantees conflict.
    pub guarantee: Option<Guarantee>,
    pub boundary: bool,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema: String,
    pub input: InputEcho,
    pub sufficient: SufficientSection,
    pub models: Vec<ModelBlock>,
}

impl AnalysisReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json_str(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

/// Fits every model in `models` and evaluates both sets of conditions.
pub fn analyze(
    t: &IncompleteTable,
    models: &[ModelId],
    opts: &BoundaryOptions,
) -> Result<AnalysisReport, FitError> {
    t.require_strict()?;
    let sufficient = SufficientSection::new(t)?;
    let mut blocks = Vec::with_capacity(models.len());
    for &model in models {
        let fit = fit_with_boundary(t, model, opts)?;
        let necessary = NecessarySection::new(t, model)?;
        let suff = sufficient.verdict(model).copied();
        let guarantee = combine(suff.as_ref(), necessary.conditions.as_ref());
        let boundary = fit.has_boundary();
        blocks.push(ModelBlock {
            model,
            fit,
            necessary,
            sufficient: suff,
            guarantee,
            boundary,
            verdict: verdict(guarantee, boundary),
        });
    }
    Ok(AnalysisReport {
        schema: SCHEMA.into(),
        input: InputEcho::new(t),
        sufficient,
        models: blocks,
    })
}

/// Diagnostics alone, without fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub schema: String,
    pub input: InputEcho,
    pub sufficient: Option<SufficientSection>,
    pub necessary: Vec<NecessarySection>,
}

impl CheckReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json_str(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}

pub fn check(
    t: &IncompleteTable,
    sufficient: bool,
    necessary: &[ModelId],
) -> Result<CheckReport, DiagnosticError> {
    Ok(CheckReport {
        schema: SCHEMA.into(),
        input: InputEcho::new(t),
        sufficient: sufficient.then(|| SufficientSection::new(t)).transpose()?,
        necessary: necessary
            .iter()
            .map(|&m| NecessarySection::new(t, m))
            .collect::<Result<_, _>>()?,
    })
}

//! Model fitting: closed forms with linear solves, an ECM algorithm for
//! constrained and unconstrained maximum likelihood, and boundary refits.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{boundary_report, BoundaryReport};
use crate::error::{FitError, ModelError};
use crate::linalg::{solve_direct, Matrix};
use crate::models::{closed_form_m11, CellEstimates, ModelId, OddsVector, Pattern};
use crate::table::IncompleteTable;

/// Raw odds at or below this fraction of the largest magnitude count as
/// boundary-indicating.
pub const NEGATIVE_TOL: f64 = 1e-8;
/// Odds at or below this value are reported as zero.
pub const BOUNDARY_TOL: f64 = 1e-12;
/// Absolute slack when comparing audit candidates by `G²`.
pub const AUDIT_TIE_ABS: f64 = 1e-4;
/// Relative slack when comparing audit candidates by `G²`.
pub const AUDIT_TIE_REL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    Em,
    ConstrainedEm,
}

/// Indices (0-based) of `α` and `β` entries held at zero.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ZeroSet {
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
}

impl ZeroSet {
    pub fn new(mut alpha: Vec<usize>, mut beta: Vec<usize>) -> Self {
        alpha.sort_unstable();
        alpha.dedup();
        beta.sort_unstable();
        beta.dedup();
        Self { alpha, beta }
    }

    pub fn alpha(i: usize) -> Self {
        Self::new(vec![i], vec![])
    }

    pub fn beta(j: usize) -> Self {
        Self::new(vec![], vec![j])
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty() && self.beta.is_empty()
    }

    pub fn len(&self) -> usize {
        self.alpha.len() + self.beta.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    /// Stop once the log-likelihood changes by less than this.
    pub tol: f64,
    pub max_iter: usize,
    /// Conditional-maximisation sweeps per iteration.
    pub cm_cycles: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
            cm_cycles: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmStats {
    pub iterations: usize,
    pub converged: bool,
    #[serde(with = "crate::serde_float")]
    pub last_delta: f64,
}

/// One EM iteration as seen from outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmTracePoint {
    /// Observed-data log-likelihood after the iteration.
    pub loglik: f64,
    /// Sum of the completed table built by the E-step.
    pub completed_total: f64,
}

/// A constrained refit explored by the boundary audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refit {
    pub zeros: ZeroSet,
    #[serde(with = "crate::serde_float")]
    pub g2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelId,
    pub method: Method,
    pub estimates: CellEstimates,
    /// Observed-data log-likelihood without its parameter-free constant.
    /// `None` when some expected count is negative.
    #[serde(with = "crate::serde_float::option")]
    pub loglik: Option<f64>,
    #[serde(with = "crate::serde_float::option")]
    pub g2: Option<f64>,
    /// Boundary-indicating entries of the unconstrained solution.
    pub negative: ZeroSet,
    /// Entries held at zero in the reported estimates.
    pub zeros: ZeroSet,
    /// `None` while the estimates are infeasible.
    pub boundary: Option<BoundaryReport>,
    pub refits: Vec<Refit>,
    /// Odds of the unconstrained solution, kept when a refit replaced it.
    pub unconstrained: Option<UnconstrainedOdds>,
    /// Whether the audit's minimum-`G²` candidate is the primary refit.
    pub audit_agrees: Option<bool>,
    pub em: Option<EmStats>,
    #[serde(skip)]
    pub trace: Vec<EmTracePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnconstrainedOdds {
    pub alpha: OddsVector,
    pub beta: OddsVector,
}

impl FitResult {
    pub fn has_boundary(&self) -> bool {
        self.boundary.as_ref().is_some_and(|b| b.boundary) || !self.negative.is_empty()
    }
}

fn group_sums(p: Pattern, m: &Matrix, f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; p.len(m.rows(), m.cols())];
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            out[p.index(i, j)] += f(i, j);
        }
    }
    out
}

/// Entries of the nonignorable odds that are at or below
/// `NEGATIVE_TOL` times their largest magnitude.
pub fn negative_set(model: ModelId, alpha: &OddsVector, beta: &OddsVector) -> ZeroSet {
    let pick = |v: &OddsVector| {
        let cut = NEGATIVE_TOL * v.max_abs();
        (0..v.len())
            .filter(|&i| v.values[i] <= cut)
            .collect::<Vec<_>>()
    };
    ZeroSet::new(
        if model.nmar_alpha() {
            pick(alpha)
        } else {
            vec![]
        },
        if model.nmar_beta() {
            pick(beta)
        } else {
            vec![]
        },
    )
}

fn require_square(t: &IncompleteTable, model: ModelId) -> Result<(), FitError> {
    if t.is_square() {
        Ok(())
    } else {
        Err(FitError::NotSquare {
            model,
            rows: t.rows(),
            cols: t.cols(),
        })
    }
}

/// Solves the likelihood equations directly. Negative odds are kept.
pub fn fit_unconstrained(t: &IncompleteTable, model: ModelId) -> Result<FitResult, FitError> {
    let m11 = closed_form_m11(t, model)?;
    let y12: Vec<f64> = t.y12().iter().map(|&v| v as f64).collect();
    let y21: Vec<f64> = t.y21().iter().map(|&v| v as f64).collect();
    let (r, c) = (m11.rows(), m11.cols());
    let alpha = match model.alpha_pattern() {
        Pattern::ByRow => {
            require_square(t, model)?;
            OddsVector::by_row(solve_direct(&m11.transpose(), &y21)?)
        }
        Pattern::Constant => OddsVector::constant(y21.iter().sum::<f64>() / m11.sum()),
        Pattern::ByCol => {
            let s = m11.col_sums();
            OddsVector::by_col((0..c).map(|j| y21[j] / s[j]).collect())
        }
    };
    let beta = match model.beta_pattern() {
        Pattern::ByCol => {
            require_square(t, model)?;
            OddsVector::by_col(solve_direct(&m11, &y12)?)
        }
        Pattern::Constant => OddsVector::constant(y12.iter().sum::<f64>() / m11.sum()),
        Pattern::ByRow => {
            let s = m11.row_sums();
            OddsVector::by_row((0..r).map(|i| y12[i] / s[i]).collect())
        }
    };
    let ab: f64 = (0..r)
        .flat_map(|i| (0..c).map(move |j| (i, j)))
        .map(|(i, j)| m11[(i, j)] * alpha.at(i, j) * beta.at(i, j))
        .sum();
    let g = t.y22() as f64 / ab;
    let estimates = CellEstimates::assemble(m11, alpha, beta, g, model)?;
    let negative = negative_set(model, &estimates.alpha, &estimates.beta);
    let mut fit = FitResult {
        model,
        method: Method::ClosedForm,
        loglik: loglik(t, &estimates).ok(),
        g2: g2(t, &estimates).ok(),
        estimates,
        negative,
        zeros: ZeroSet::default(),
        boundary: None,
        refits: vec![],
        unconstrained: None,
        audit_agrees: None,
        em: None,
        trace: vec![],
    };
    if fit.negative.is_empty() {
        fit.boundary = Some(boundary_report(&fit, BOUNDARY_TOL)?);
    }
    Ok(fit)
}

/// Observed and expected counts paired for each likelihood term.
fn observed_terms(t: &IncompleteTable, e: &CellEstimates) -> Result<Vec<(f64, f64)>, ModelError> {
    if let Some(err) = e.mu.negative_entries().into_iter().next() {
        return Err(err);
    }
    let mu = &e.mu;
    let mut out = Vec::with_capacity(t.rows() * t.cols() + t.rows() + t.cols() + 1);
    for i in 0..t.rows() {
        for j in 0..t.cols() {
            out.push((t.y11(i, j) as f64, mu.get(i, j, 0, 0)));
        }
    }
    let m12 = mu.layer(0, 1).row_sums();
    out.extend(t.y12().iter().zip(m12).map(|(&y, m)| (y as f64, m)));
    let m21 = mu.layer(1, 0).col_sums();
    out.extend(t.y21().iter().zip(m21).map(|(&y, m)| (y as f64, m)));
    out.push((t.y22() as f64, mu.layer(1, 1).sum()));
    Ok(out)
}

/// `Σ y log μ − Σ μ` over the observed pieces of the table.
pub fn loglik(t: &IncompleteTable, e: &CellEstimates) -> Result<f64, ModelError> {
    let terms = observed_terms(t, e)?;
    let fitted: f64 = terms
        .iter()
        .map(|&(y, m)| if y > 0.0 { y * m.ln() } else { 0.0 })
        .sum();
    Ok(fitted - e.mu.total())
}

/// Likelihood-ratio statistic against the perfect-fit model, including the
/// `Σ μ̂ − N` correction. A zero fitted margin against a positive count
/// gives `+∞`.
pub fn g2(t: &IncompleteTable, e: &CellEstimates) -> Result<f64, ModelError> {
    let terms = observed_terms(t, e)?;
    let mut s = 0.0;
    for (y, m) in terms {
        if y > 0.0 {
            if m == 0.0 {
                return Ok(f64::INFINITY);
            }
            s += y * (y / m).ln();
        }
    }
    Ok(2.0 * (s + e.mu.total() - t.total() as f64))
}

fn validate_zeros(t: &IncompleteTable, model: ModelId, zeros: &ZeroSet) -> Result<(), FitError> {
    let check = |idx: &[usize], n: usize, nmar: bool, name: &str| -> Result<(), FitError> {
        if idx.is_empty() {
            return Ok(());
        }
        if !nmar {
            return Err(FitError::Constraint(format!(
                "{model} has no nonignorable {name} odds to constrain"
            )));
        }
        if let Some(&k) = idx.iter().find(|&&k| k >= n) {
            return Err(FitError::Constraint(format!(
                "{name} index {} out of range 1..={n}",
                k + 1
            )));
        }
        if idx.len() >= n {
            return Err(FitError::Constraint(format!(
                "at most {} of the {n} {name} odds may be zero",
                n - 1
            )));
        }
        Ok(())
    };
    check(&zeros.alpha, t.rows(), model.nmar_alpha(), "alpha")?;
    check(&zeros.beta, t.cols(), model.nmar_beta(), "beta")
}

#[derive(Clone)]
struct EmState {
    m: Matrix,
    a: Vec<f64>,
    b: Vec<f64>,
    g: f64,
}

struct EmRun {
    state: EmState,
    stats: EmStats,
    trace: Vec<EmTracePoint>,
}

/// Observed data and model structure shared by every EM step.
struct EmProblem<'a> {
    pa: Pattern,
    pb: Pattern,
    y: Matrix,
    y12: Vec<f64>,
    y21: Vec<f64>,
    y22: f64,
    zeros: &'a ZeroSet,
    cm_cycles: usize,
}

impl EmProblem<'_> {
    fn odds(&self, s: &EmState, i: usize, j: usize) -> (f64, f64) {
        (s.a[self.pa.index(i, j)], s.b[self.pb.index(i, j)])
    }

    /// Expected `(μ12, μ21, μ22)` at cell `(i, j)`.
    fn cell(&self, s: &EmState, i: usize, j: usize) -> (f64, f64, f64) {
        let m = s.m[(i, j)];
        let (a, b) = self.odds(s, i, j);
        (m * b, m * a, m * a * b * s.g)
    }

    #[allow(clippy::needless_range_loop)]
    fn margins(&self, s: &EmState) -> (Vec<f64>, Vec<f64>, f64, f64) {
        let (r, c) = (self.y.rows(), self.y.cols());
        let mut m12 = vec![0.0; r];
        let mut m21 = vec![0.0; c];
        let mut m22 = 0.0;
        let mut total = 0.0;
        for i in 0..r {
            for j in 0..c {
                let (u12, u21, u22) = self.cell(s, i, j);
                m12[i] += u12;
                m21[j] += u21;
                m22 += u22;
                total += s.m[(i, j)] + u12 + u21 + u22;
            }
        }
        (m12, m21, m22, total)
    }

    fn loglik(&self, s: &EmState) -> f64 {
        let (m12, m21, m22, total) = self.margins(s);
        let mut ll: f64 = self.y.iter().zip(s.m.iter()).map(|(y, m)| y * m.ln()).sum();
        ll += self
            .y12
            .iter()
            .zip(&m12)
            .map(|(y, m)| y * m.ln())
            .sum::<f64>();
        ll += self
            .y21
            .iter()
            .zip(&m21)
            .map(|(y, m)| y * m.ln())
            .sum::<f64>();
        ll + self.y22 * m22.ln() - total
    }

    /// One E-step followed by `cm_cycles` conditional maximisation sweeps.
    /// Also returns the total of the completed table.
    fn step(&self, s: &EmState) -> (EmState, f64) {
        let (r, c) = (self.y.rows(), self.y.cols());
        let (m12, m21, m22, _) = self.margins(s);
        let mut x = [
            Matrix::zeros(r, c),
            Matrix::zeros(r, c),
            Matrix::zeros(r, c),
            Matrix::zeros(r, c),
        ];
        for i in 0..r {
            for j in 0..c {
                let (u12, u21, u22) = self.cell(s, i, j);
                x[0][(i, j)] = self.y[(i, j)];
                x[1][(i, j)] = if m12[i] > 0.0 {
                    self.y12[i] * u12 / m12[i]
                } else {
                    0.0
                };
                x[2][(i, j)] = if m21[j] > 0.0 {
                    self.y21[j] * u21 / m21[j]
                } else {
                    0.0
                };
                x[3][(i, j)] = if m22 > 0.0 { self.y22 * u22 / m22 } else { 0.0 };
            }
        }
        let completed_total: f64 = x.iter().map(Matrix::sum).sum();
        let mut s = s.clone();
        for _ in 0..self.cm_cycles.max(1) {
            s.m = Matrix::from_fn(r, c, |i, j| {
                let (a, b) = self.odds(&s, i, j);
                (x[0][(i, j)] + x[1][(i, j)] + x[2][(i, j)] + x[3][(i, j)])
                    / (1.0 + a + b + a * b * s.g)
            });
            let num = group_sums(self.pa, &s.m, |i, j| x[2][(i, j)] + x[3][(i, j)]);
            let den = group_sums(self.pa, &s.m, |i, j| {
                s.m[(i, j)] * (1.0 + s.b[self.pb.index(i, j)] * s.g)
            });
            for (k, v) in s.a.iter_mut().enumerate() {
                *v = if self.zeros.alpha.contains(&k) || den[k] <= 0.0 {
                    0.0
                } else {
                    num[k] / den[k]
                };
            }
            let num = group_sums(self.pb, &s.m, |i, j| x[1][(i, j)] + x[3][(i, j)]);
            let den = group_sums(self.pb, &s.m, |i, j| {
                s.m[(i, j)] * (1.0 + s.a[self.pa.index(i, j)] * s.g)
            });
            for (k, v) in s.b.iter_mut().enumerate() {
                *v = if self.zeros.beta.contains(&k) || den[k] <= 0.0 {
                    0.0
                } else {
                    num[k] / den[k]
                };
            }
            let den: f64 = (0..r)
                .flat_map(|i| (0..c).map(move |j| (i, j)))
                .map(|(i, j)| {
                    let (a, b) = self.odds(&s, i, j);
                    s.m[(i, j)] * a * b
                })
                .sum();
            s.g = x[3].sum() / den;
        }
        (s, completed_total)
    }

    /// Free parameters on the log scale; zeroed odds are left out.
    fn pack(&self, s: &EmState) -> Vec<f64> {
        let mut v: Vec<f64> = s.m.iter().map(|x| x.ln()).collect();
        v.extend(
            s.a.iter()
                .enumerate()
                .filter(|(k, _)| !self.zeros.alpha.contains(k))
                .map(|(_, x)| x.ln()),
        );
        v.extend(
            s.b.iter()
                .enumerate()
                .filter(|(k, _)| !self.zeros.beta.contains(k))
                .map(|(_, x)| x.ln()),
        );
        v.push(s.g.ln());
        v
    }

    /// Gradient of the observed-data log-likelihood in packed order: the
    /// expected complete-data counts minus the fitted ones.
    fn gradient(&self, s: &EmState) -> Vec<f64> {
        let (r, c) = (self.y.rows(), self.y.cols());
        let (m12, m21, m22, _) = self.margins(s);
        let mut gm = Matrix::zeros(r, c);
        let mut ga = vec![0.0; s.a.len()];
        let mut gb = vec![0.0; s.b.len()];
        let mut gg = 0.0;
        for i in 0..r {
            for j in 0..c {
                let (u12, u21, u22) = self.cell(s, i, j);
                let x12 = if m12[i] > 0.0 {
                    self.y12[i] * u12 / m12[i]
                } else {
                    0.0
                };
                let x21 = if m21[j] > 0.0 {
                    self.y21[j] * u21 / m21[j]
                } else {
                    0.0
                };
                let x22 = if m22 > 0.0 { self.y22 * u22 / m22 } else { 0.0 };
                gm[(i, j)] = self.y[(i, j)] + x12 + x21 + x22 - (s.m[(i, j)] + u12 + u21 + u22);
                ga[self.pa.index(i, j)] += x21 + x22 - u21 - u22;
                gb[self.pb.index(i, j)] += x12 + x22 - u12 - u22;
                gg += x22 - u22;
            }
        }
        let mut v: Vec<f64> = gm.iter().copied().collect();
        v.extend(
            ga.iter()
                .enumerate()
                .filter(|(k, _)| !self.zeros.alpha.contains(k))
                .map(|(_, x)| *x),
        );
        v.extend(
            gb.iter()
                .enumerate()
                .filter(|(k, _)| !self.zeros.beta.contains(k))
                .map(|(_, x)| *x),
        );
        v.push(gg);
        v
    }

    /// Newton step from `s` with a finite-difference Hessian and step
    /// halving. Returns the new state only if it beats `ll`.
    fn newton(&self, s: &EmState, ll: f64) -> Option<(EmState, f64)> {
        const H: f64 = 1e-5;
        let theta = self.pack(s);
        if theta.iter().any(|x| !x.is_finite()) {
            return None;
        }
        let n = theta.len();
        let grad = self.gradient(s);
        let mut hess = Matrix::zeros(n, n);
        for k in 0..n {
            let mut up = theta.clone();
            let mut dn = theta.clone();
            up[k] += H;
            dn[k] -= H;
            let gu = self.gradient(&self.unpack(&up, s));
            let gd = self.gradient(&self.unpack(&dn, s));
            for l in 0..n {
                hess[(l, k)] = -(gu[l] - gd[l]) / (2.0 * H);
            }
        }
        let sym = Matrix::from_fn(n, n, |i, j| 0.5 * (hess[(i, j)] + hess[(j, i)]));
        let step = damped_step(&sym, &grad)?;
        let mut scale = 1.0;
        for _ in 0..20 {
            let cand: Vec<f64> = theta
                .iter()
                .zip(&step)
                .map(|(t, d)| t + scale * d)
                .collect();
            let cs = self.unpack(&cand, s);
            let cll = self.loglik(&cs);
            if cll.is_finite() && cll > ll {
                return Some((cs, cll));
            }
            scale *= 0.5;
        }
        None
    }

    fn unpack(&self, v: &[f64], like: &EmState) -> EmState {
        let mut s = like.clone();
        let mut it = v.iter().map(|x| x.exp());
        s.m = Matrix::from_fn(s.m.rows(), s.m.cols(), |_, _| it.next().unwrap());
        for (k, a) in s.a.iter_mut().enumerate() {
            if !self.zeros.alpha.contains(&k) {
                *a = it.next().unwrap();
            }
        }
        for (k, b) in s.b.iter_mut().enumerate() {
            if !self.zeros.beta.contains(&k) {
                *b = it.next().unwrap();
            }
        }
        s.g = it.next().unwrap();
        s
    }
}

/// Solves `(A + λI) d = g` with the smallest `λ` on a decade grid that makes
/// the shifted matrix positive definite, so `d` is always an ascent direction.
fn damped_step(a: &Matrix, g: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows();
    let scale = a
        .diagonal()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    let mut lambda = 0.0;
    for _ in 0..40 {
        let shifted = Matrix::from_fn(n, n, |i, j| a[(i, j)] + if i == j { lambda } else { 0.0 });
        if let Some(d) = cholesky_solve(&shifted, g) {
            if d.iter().all(|v| v.is_finite()) {
                return Some(d);
            }
        }
        lambda = if lambda == 0.0 {
            1e-10 * scale
        } else {
            lambda * 10.0
        };
    }
    None
}

fn cholesky_solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.rows();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[(i, j)];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum.is_nan() || sum <= 0.0 {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    let mut z = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * z[k]).sum();
        z[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (z[i] - s) / l[i * n + i];
    }
    Some(x)
}

/// ECM with a safeguarded Newton acceleration. Each iteration takes one
/// ECM step, then tries a Newton step on the observed-data log-likelihood
/// over the free log-parameters and keeps it only if it raises the
/// likelihood further, so the sequence of log-likelihoods is non-decreasing.
fn run_em(t: &IncompleteTable, model: ModelId, zeros: &ZeroSet, opts: &EmOptions) -> EmRun {
    let (r, c) = (t.rows(), t.cols());
    let p = EmProblem {
        pa: model.alpha_pattern(),
        pb: model.beta_pattern(),
        y: t.y11_matrix(),
        y12: t.y12().iter().map(|&v| v as f64).collect(),
        y21: t.y21().iter().map(|&v| v as f64).collect(),
        y22: t.y22() as f64,
        zeros,
        cm_cycles: opts.cm_cycles,
    };
    let y = &p.y;

    // Start from the y11 profile: each margin split in proportion to it.
    let rs = y.row_sums();
    let cs = y.col_sums();
    let prop = |v: f64, s: f64, n: usize| if s > 0.0 { v / s } else { 1.0 / n as f64 };
    let x12 = Matrix::from_fn(r, c, |i, j| p.y12[i] * prop(y[(i, j)], rs[i], c));
    let x21 = Matrix::from_fn(r, c, |i, j| p.y21[j] * prop(y[(i, j)], cs[j], r));
    let ratio = |pat: Pattern, x: &Matrix| {
        let num = group_sums(pat, y, |i, j| x[(i, j)]);
        let den = group_sums(pat, y, |i, j| y[(i, j)]);
        num.iter()
            .zip(&den)
            .map(|(n, d)| n / d)
            .collect::<Vec<f64>>()
    };
    let mut a = ratio(p.pa, &x21);
    let mut b = ratio(p.pb, &x12);
    for &i in &zeros.alpha {
        a[i] = 0.0;
    }
    for &j in &zeros.beta {
        b[j] = 0.0;
    }
    let ab0: f64 = (0..r)
        .flat_map(|i| (0..c).map(move |j| (i, j)))
        .map(|(i, j)| y[(i, j)] * a[p.pa.index(i, j)] * b[p.pb.index(i, j)])
        .sum();
    let mut s = EmState {
        m: y.clone(),
        a,
        b,
        g: p.y22 / ab0,
    };

    let mut trace = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    let mut stats = EmStats {
        iterations: 0,
        converged: false,
        last_delta: f64::INFINITY,
    };
    for iter in 1..=opts.max_iter {
        let (next, completed_total) = p.step(&s);
        let mut ll = p.loglik(&next);
        s = next;
        if let Some((candidate, cll)) = p.newton(&s, ll) {
            s = candidate;
            ll = cll;
        }
        trace.push(EmTracePoint {
            loglik: ll,
            completed_total,
        });
        stats.iterations = iter;
        stats.last_delta = (ll - prev).abs();
        prev = ll;
        if stats.last_delta < opts.tol {
            stats.converged = true;
            break;
        }
    }
    EmRun {
        state: s,
        stats,
        trace,
    }
}

fn odds(p: Pattern, v: Vec<f64>) -> OddsVector {
    OddsVector {
        pattern: p,
        values: v,
    }
}

/// Maximum likelihood by ECM with the given entries of `α`/`β` held at 0.
pub fn fit_em(
    t: &IncompleteTable,
    model: ModelId,
    zeros: &ZeroSet,
    opts: &EmOptions,
) -> Result<FitResult, FitError> {
    let mut fit = fit_em_bare(t, model, zeros, opts)?;
    fit.boundary = Some(boundary_report(&fit, BOUNDARY_TOL)?);
    Ok(fit)
}

fn fit_em_bare(
    t: &IncompleteTable,
    model: ModelId,
    zeros: &ZeroSet,
    opts: &EmOptions,
) -> Result<FitResult, FitError> {
    t.require_strict()?;
    validate_zeros(t, model, zeros)?;
    let zeros = ZeroSet::new(zeros.alpha.clone(), zeros.beta.clone());
    let run = run_em(t, model, &zeros, opts);
    let s = run.state;
    let estimates = CellEstimates::assemble(
        s.m,
        odds(model.alpha_pattern(), s.a),
        odds(model.beta_pattern(), s.b),
        s.g,
        model,
    )?;
    Ok(FitResult {
        model,
        method: if zeros.is_empty() {
            Method::Em
        } else {
            Method::ConstrainedEm
        },
        loglik: Some(loglik(t, &estimates)?),
        g2: Some(g2(t, &estimates)?),
        estimates,
        negative: ZeroSet::default(),
        zeros,
        boundary: None,
        refits: vec![],
        unconstrained: None,
        audit_agrees: None,
        em: Some(run.stats),
        trace: run.trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryOptions {
    /// Also refit every single-entry boundary and compare `G²`.
    pub audit: bool,
    pub em: EmOptions,
    pub start: Start,
}

/// How the unconstrained estimates are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Start {
    /// Closed form; entries below zero mark the boundary.
    #[default]
    ClosedForm,
    /// ECM over the open parameter space; entries driven to zero mark the boundary.
    Em,
}

/// Unconstrained solve, followed by a constrained refit on the entries
/// found negative when there are any.
pub fn fit_with_boundary(
    t: &IncompleteTable,
    model: ModelId,
    opts: &BoundaryOptions,
) -> Result<FitResult, FitError> {
    let raw = match opts.start {
        Start::ClosedForm => fit_unconstrained(t, model)?,
        Start::Em => {
            let mut f = fit_em_bare(t, model, &ZeroSet::default(), &opts.em)?;
            f.negative = negative_set(model, &f.estimates.alpha, &f.estimates.beta);
            if f.negative.is_empty() {
                f.boundary = Some(boundary_report(&f, BOUNDARY_TOL)?);
            }
            f
        }
    };
    if raw.negative.is_empty() {
        return Ok(raw);
    }
    let mut zeros = raw.negative.clone();
    let mut fit = fit_em_bare(t, model, &zeros, &opts.em)?;
    // Free entries the refit drove onto the boundary join the zero set.
    for _ in 0..t.rows() + t.cols() {
        let e = &fit.estimates;
        let snapped = negative_set(model, &e.alpha, &e.beta);
        let grown = ZeroSet::new(
            zeros.alpha.iter().chain(&snapped.alpha).copied().collect(),
            zeros.beta.iter().chain(&snapped.beta).copied().collect(),
        );
        if grown == zeros || grown.alpha.len() >= t.rows() || grown.beta.len() >= t.cols() {
            break;
        }
        zeros = grown;
        fit = fit_em_bare(t, model, &zeros, &opts.em)?;
    }
    fit.negative = raw.negative.clone();
    fit.unconstrained = Some(UnconstrainedOdds {
        alpha: raw.estimates.alpha.clone(),
        beta: raw.estimates.beta.clone(),
    });
    fit.boundary = Some(boundary_report(&fit, BOUNDARY_TOL)?);
    if opts.audit {
        let mut candidates: Vec<ZeroSet> = Vec::new();
        if model.nmar_alpha() {
            candidates.extend((0..t.rows()).map(ZeroSet::alpha));
        }
        if model.nmar_beta() {
            candidates.extend((0..t.cols()).map(ZeroSet::beta));
        }
        if !candidates.contains(&raw.negative) {
            candidates.push(raw.negative.clone());
        }
        for z in candidates {
            let r = fit_em_bare(t, model, &z, &opts.em)?;
            fit.refits.push(Refit {
                zeros: z,
                g2: r.g2.unwrap_or(f64::INFINITY),
            });
        }
        let best = fit
            .refits
            .iter()
            .map(|r| r.g2)
            .fold(f64::INFINITY, f64::min);
        let own = fit.g2.unwrap_or(f64::INFINITY);
        fit.audit_agrees = Some(own <= best + AUDIT_TIE_ABS + AUDIT_TIE_REL * best.abs());
    }
    Ok(fit)
}

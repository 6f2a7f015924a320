#![allow(dead_code)]

use boundary_scan::diagnostics::{
    necessary_conditions, odds_profile, sufficient_conditions, sufficient_flag,
};
use boundary_scan::fitting::{
    fit_em, fit_unconstrained, fit_with_boundary, BoundaryOptions, EmOptions, FitResult, ZeroSet,
};
use boundary_scan::lambda::lambda_decompose;
use boundary_scan::linalg::{kaykobad_dominates, solve_iterative, LinearSystem, Matrix};
use boundary_scan::{datasets, IncompleteTable, ModelId, Validation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Slack for a log-likelihood step counted as a decrease.
pub const MONOTONE_REL: f64 = 1e-9;
/// Perfect-fit models must reproduce every observed count to this `G²`.
pub const PERFECT_FIT_G2: f64 = 1e-8;
/// Relative error allowed when rebuilding cells from their log-linear terms.
pub const LAMBDA_ROUND_TRIP: f64 = 1e-10;
/// Relative slack for count conservation and margin reproduction.
pub const COUNT_REL: f64 = 1e-8;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_table(r: &mut impl Rng, rows: usize, cols: usize) -> IncompleteTable {
    let y11 = (0..rows)
        .map(|_| (0..cols).map(|_| r.gen_range(1..=400)).collect())
        .collect();
    let y12 = (0..rows).map(|_| r.gen_range(1..=150)).collect();
    let y21 = (0..cols).map(|_| r.gen_range(1..=150)).collect();
    IncompleteTable::new(y11, y12, y21, r.gen_range(1..=60), Validation::Strict).unwrap()
}

/// Heavy diagonal, light margins: the dominance conditions tend to fail.
pub fn dominant_table(r: &mut impl Rng, n: usize) -> IncompleteTable {
    let y11 = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        r.gen_range(300..=900)
                    } else {
                        r.gen_range(1..=30)
                    }
                })
                .collect()
        })
        .collect();
    let y12 = (0..n).map(|_| r.gen_range(20..=80)).collect();
    let y21 = (0..n).map(|_| r.gen_range(20..=80)).collect();
    IncompleteTable::new(y11, y12, y21, r.gen_range(1..=30), Validation::Strict).unwrap()
}

pub fn random_square(r: &mut impl Rng) -> IncompleteTable {
    let n = r.gen_range(2..=4);
    random_table(r, n, n)
}

/// A square table on which at least one model's closed form leaves the
/// parameter space.
pub fn boundary_table(r: &mut impl Rng) -> IncompleteTable {
    loop {
        let t = random_square(r);
        if ModelId::ALL
            .into_iter()
            .any(|m| fit_unconstrained(&t, m).is_ok_and(|f| !f.negative.is_empty()))
        {
            return t;
        }
    }
}

/// The tables of the first five worked examples.
pub fn example_tables() -> Vec<(&'static str, IncompleteTable)> {
    vec![
        ("smoking_birthweight", datasets::smoking_birthweight()),
        ("sparse_margins", datasets::sparse_margins()),
        (
            "smoking_birthweight_modified",
            datasets::smoking_birthweight_modified(),
        ),
        ("bone_density_income", datasets::bone_density_income()),
        (
            "bone_density_income_modified",
            datasets::bone_density_income_modified(),
        ),
    ]
}

#[derive(Debug, Default)]
pub struct Tally {
    /// Cases where the property's hypothesis held and the claim was checked.
    pub checked: usize,
    pub violations: Vec<String>,
}

impl Tally {
    pub fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.violations.push(what());
        }
    }

    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self) -> String {
        let head = format!(
            "{} checked, {} violations",
            self.checked,
            self.violations.len()
        );
        match self.violations.first() {
            Some(v) => format!("{head}; first: {v}"),
            None => head,
        }
    }
}

fn negatives(f: &FitResult, model: ModelId) -> (usize, usize) {
    let a = if model.nmar_alpha() {
        f.negative.alpha.len()
    } else {
        0
    };
    let b = if model.nmar_beta() {
        f.negative.beta.len()
    } else {
        0
    };
    (a, b)
}

/// Flagged models leave the parameter space, with between 1 and `I-1`
/// entries below zero on each flagged side.
pub fn flagged_odds_suite(seed: u64, n: usize) -> Tally {
    let mut r = rng(seed);
    let mut t1 = Tally::default();
    for case in 0..n {
        let t = random_square(&mut r);
        let sc = sufficient_conditions(&odds_profile(&t).unwrap());
        let lim = t.rows() - 1;
        for model in ModelId::ALL {
            if !sufficient_flag(model, sc.condition1, sc.condition2) {
                continue;
            }
            let f = fit_unconstrained(&t, model).unwrap();
            let (na, nb) = negatives(&f, model);
            let side_ok = match model {
                ModelId::M1 | ModelId::M3 => (1..=lim).contains(&na),
                ModelId::M2 | ModelId::M4 => (1..=lim).contains(&nb),
                ModelId::M5 => {
                    (!sc.condition1 || (1..=lim).contains(&na))
                        && (!sc.condition2 || (1..=lim).contains(&nb))
                }
            };
            t1.check(side_ok, || {
                format!(
                    "case {case} {model}: {} negatives ({na}, {nb})",
                    t.to_json_string()
                )
            });
        }
    }
    t1
}

/// Row dominance implies a strictly positive solution, reached by both
/// solvers.
pub fn positive_solution_suite(seed: u64, n: usize) -> Tally {
    let mut r = rng(seed);
    let mut tally = Tally::default();
    let mut tried = 0;
    while tried < n {
        tried += 1;
        let dim = r.gen_range(2..=6);
        let spread = r.gen_range(1.0..4.0);
        let a = Matrix::from_fn(dim, dim, |i, j| {
            if i == j {
                r.gen_range(1.0..10.0) * dim as f64 * spread
            } else if r.gen_bool(0.2) {
                0.0
            } else {
                r.gen_range(0.0..10.0)
            }
        });
        let b: Vec<f64> = (0..dim).map(|_| r.gen_range(1.0..100.0)).collect();
        let s = LinearSystem::new(a.clone(), b.clone()).unwrap();
        if !kaykobad_dominates(&s).iter().all(|row| row.holds) {
            continue;
        }
        let x = s.solve_direct().unwrap();
        let it = solve_iterative(&s, 1e-12, 100_000);
        let agree = it.as_ref().is_ok_and(|y| {
            x.iter()
                .zip(&y.x)
                .all(|(p, q)| (p - q).abs() <= 1e-8 * p.abs().max(1.0))
        });
        tally.check(x.iter().all(|&v| v > 0.0) && agree, || {
            format!("A={:?} b={b:?} x={x:?}", a.to_rows())
        });
    }
    tally
}

/// A model whose dominance conditions fail has an interior closed form.
pub fn dominance_suite(seed: u64, n: usize) -> Tally {
    let mut r = rng(seed);
    let mut tally = Tally::default();
    for case in 0..n {
        let t = if case % 2 == 0 {
            random_square(&mut r)
        } else {
            let d = r.gen_range(2..=4);
            dominant_table(&mut r, d)
        };
        for model in ModelId::ALL {
            let nc = necessary_conditions(&t, model).unwrap();
            if nc.satisfied {
                continue;
            }
            let f = fit_unconstrained(&t, model).unwrap();
            tally.check(f.negative.is_empty(), || {
                format!(
                    "case {case} {model}: {} negatives {:?}",
                    t.to_json_string(),
                    f.negative
                )
            });
        }
    }
    tally
}

fn check_trace(tally: &mut Tally, label: &str, t: &IncompleteTable, f: &FitResult) {
    let n = t.total() as f64;
    let mut prev = f64::NEG_INFINITY;
    let mut ok = true;
    let mut conserved = true;
    for p in &f.trace {
        if p.loglik < prev - MONOTONE_REL * prev.abs().max(1.0) {
            ok = false;
        }
        if (p.completed_total - n).abs() > COUNT_REL * n {
            conserved = false;
        }
        prev = p.loglik;
    }
    tally.check(ok && conserved && !f.trace.is_empty(), || {
        format!("{label} {}: monotone {ok}, conserved {conserved}", f.model)
    });
}

fn em_runs(tally: &mut Tally, label: &str, t: &IncompleteTable, model: ModelId) {
    let opts = EmOptions::default();
    let free = fit_em(t, model, &ZeroSet::default(), &opts);
    if let Ok(f) = free {
        check_trace(tally, label, t, &f);
    }
    if let Ok(raw) = fit_unconstrained(t, model) {
        if !raw.negative.is_empty() {
            if let Ok(f) = fit_em(t, model, &raw.negative, &opts) {
                check_trace(tally, label, t, &f);
            }
        }
    }
}

/// Every ECM iteration is an ascent step and keeps the completed table's
/// total at `N`.
pub fn em_monotone_suite(seed: u64, n: usize) -> Tally {
    let mut tally = Tally::default();
    for (name, t) in example_tables() {
        for model in ModelId::ALL {
            em_runs(&mut tally, name, &t, model);
        }
    }
    let mut r = rng(seed);
    for case in 0..n {
        let rows = r.gen_range(2..=4);
        let cols = if r.gen_bool(0.7) {
            rows
        } else {
            r.gen_range(2..=4)
        };
        let t = random_table(&mut r, rows, cols);
        let model = ModelId::ALL[case % 5];
        em_runs(&mut tally, &format!("random {case}"), &t, model);
    }
    tally
}

fn margin_gap(t: &IncompleteTable, f: &FitResult) -> f64 {
    let mu = &f.estimates.mu;
    let (r, c) = (t.rows(), t.cols());
    let mut gap: f64 = 0.0;
    for i in 0..r {
        for j in 0..c {
            gap = gap.max((mu.get(i, j, 0, 0) - t.y11(i, j) as f64).abs());
        }
        let s: f64 = (0..c).map(|j| mu.get(i, j, 0, 1)).sum();
        gap = gap.max((s - t.y12()[i] as f64).abs());
    }
    for j in 0..c {
        let s: f64 = (0..r).map(|i| mu.get(i, j, 1, 0)).sum();
        gap = gap.max((s - t.y21()[j] as f64).abs());
    }
    gap.max((mu.layer(1, 1).sum() - t.y22() as f64).abs())
}

/// Interior fits of the saturated models reproduce the data exactly.
pub fn perfect_fit_suite(seed: u64, n: usize) -> Tally {
    let mut r = rng(seed);
    let mut tally = Tally::default();
    for case in 0..n {
        let t = random_square(&mut r);
        let scale = t.total() as f64;
        for model in [ModelId::M3, ModelId::M4, ModelId::M5] {
            let f = fit_unconstrained(&t, model).unwrap();
            if !f.negative.is_empty() {
                continue;
            }
            let g2 = f.g2.unwrap_or(f64::INFINITY);
            let gap = margin_gap(&t, &f);
            tally.check(
                g2.abs() <= PERFECT_FIT_G2 && gap <= COUNT_REL * scale,
                || format!("case {case} {model}: G2 {g2:e}, margin gap {gap:e}"),
            );
        }
    }
    tally
}

fn lambda_gap(f: &FitResult) -> Result<f64, String> {
    let mu = &f.estimates.mu;
    let d = lambda_decompose(mu).map_err(|e| e.to_string())?;
    let back = d.compose();
    let mut worst: f64 = 0.0;
    for i in 0..mu.rows() {
        for j in 0..mu.cols() {
            for k in 0..2 {
                for l in 0..2 {
                    let (x, y) = (mu.get(i, j, k, l), back.get(i, j, k, l));
                    let err = if x == 0.0 {
                        y.abs()
                    } else {
                        (x - y).abs() / x.abs()
                    };
                    worst = worst.max(err);
                }
            }
        }
    }
    Ok(worst)
}

/// Fitted cells are rebuilt from their log-linear terms, including
/// boundary fits where some terms are infinite.
pub fn lambda_suite(seed: u64, n: usize) -> Tally {
    let mut r = rng(seed);
    let mut tally = Tally::default();
    let opts = BoundaryOptions::default();
    for case in 0..n {
        let rows = r.gen_range(2..=4);
        let t = random_table(&mut r, rows, rows);
        for model in ModelId::ALL {
            let f = fit_with_boundary(&t, model, &opts).unwrap();
            match lambda_gap(&f) {
                Ok(gap) => tally.check(gap <= LAMBDA_ROUND_TRIP, || {
                    format!("case {case} {model}: gap {gap:e}")
                }),
                Err(e) => tally.check(false, || format!("case {case} {model}: {e}")),
            }
        }
    }
    tally
}

/// The refit on the negative entries attains the lowest `G²` among the
/// audited boundary faces.
pub fn audit_suite(seed: u64, n: usize) -> Tally {
    let mut tally = Tally::default();
    let opts = BoundaryOptions {
        audit: true,
        ..Default::default()
    };
    let run = |label: &str, t: &IncompleteTable, tally: &mut Tally| {
        for model in ModelId::ALL {
            let f = fit_with_boundary(t, model, &opts).unwrap();
            if let Some(agrees) = f.audit_agrees {
                tally.check(agrees, || {
                    let best = f
                        .refits
                        .iter()
                        .min_by(|a, b| a.g2.total_cmp(&b.g2))
                        .unwrap();
                    format!(
                        "{label} {model}: refit on {:?} gives G2 {:.4}, face {:?} gives {:.4}",
                        f.negative,
                        f.g2.unwrap_or(f64::NAN),
                        best.zeros,
                        best.g2
                    )
                });
            }
        }
    };
    for (name, t) in datasets::all() {
        run(name, &t, &mut tally);
    }
    let mut r = rng(seed);
    for case in 0..n {
        let t = boundary_table(&mut r);
        run(
            &format!("random {case} {}", t.to_json_string()),
            &t,
            &mut tally,
        );
    }
    tally
}

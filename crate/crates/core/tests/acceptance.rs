//! Acceptance criteria 1-8, one PASS/FAIL line each.

mod common;

use std::process::ExitCode;

use boundary_scan::diagnostics::{
    necessary_conditions, odds_profile, sufficient_conditions, PairOdds, Variable,
};
use boundary_scan::fitting::{
    fit_unconstrained, fit_with_boundary, BoundaryOptions, FitResult, ZeroSet, BOUNDARY_TOL,
};
use boundary_scan::report::{analyze, Verdict};
use boundary_scan::{datasets, IncompleteTable, ModelId};

/// Estimates quoted to four decimals.
const EST_TOL: f64 = 5e-4;
/// `G²` values, and every quantity in criteria 2 and 3.
const G2_TOL: f64 = 5e-3;
/// Odds are compared at their two-decimal display.
const ODDS_DECIMALS: i32 = 2;

const SUITE_SEED: u64 = 0x5eed_b0a7;

#[derive(Default)]
struct Checks {
    failures: Vec<String>,
}

impl Checks {
    fn close(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        let d = (got - want).abs();
        if d.is_nan() || d > tol {
            self.failures.push(format!(
                "{what}: got {got:.6}, want {want} (|d| {d:.2e} > {tol:e})"
            ));
        }
    }

    fn all_close(&mut self, what: &str, got: &[f64], want: &[f64], tol: f64) {
        if got.len() != want.len() {
            self.failures
                .push(format!("{what}: length {} vs {}", got.len(), want.len()));
            return;
        }
        for (k, (g, w)) in got.iter().zip(want).enumerate() {
            self.close(&format!("{what}[{}]", k + 1), *g, *w, tol);
        }
    }

    fn truth(&mut self, what: &str, ok: bool) {
        if !ok {
            self.failures.push(what.to_string());
        }
    }
}

fn audited(t: &IncompleteTable, model: ModelId) -> FitResult {
    let opts = BoundaryOptions {
        audit: true,
        ..Default::default()
    };
    fit_with_boundary(t, model, &opts).expect("fit succeeds")
}

fn refit_g2(f: &FitResult, zeros: &ZeroSet) -> f64 {
    f.refits
        .iter()
        .find(|r| &r.zeros == zeros)
        .map_or(f64::NAN, |r| r.g2)
}

fn zero_probability(f: &FitResult, variable: Variable, level: usize) -> Option<f64> {
    let b = f.boundary.as_ref()?;
    b.forms
        .iter()
        .find(|x| x.variable == variable && x.level == level)
        .map(|x| x.probability)
}

fn alpha(f: &FitResult) -> &[f64] {
    &f.estimates.alpha.values
}

fn beta(f: &FitResult) -> &[f64] {
    &f.estimates.beta.values
}

/// Audit `G²` pairs for zeroing the first and second entries.
fn g2_pairs(
    c: &mut Checks,
    t: &IncompleteTable,
    label: &str,
    want: &[(ModelId, f64, f64)],
    beta_side: bool,
) {
    for &(model, first, second) in want {
        let f = audited(t, model);
        let z = |k| {
            if beta_side {
                ZeroSet::beta(k)
            } else {
                ZeroSet::alpha(k)
            }
        };
        let side = if beta_side { "beta" } else { "alpha" };
        c.close(
            &format!("{label} {model} G2 {side}1=0"),
            refit_g2(&f, &z(0)),
            first,
            G2_TOL,
        );
        c.close(
            &format!("{label} {model} G2 {side}2=0"),
            refit_g2(&f, &z(1)),
            second,
            G2_TOL,
        );
        let best = f
            .refits
            .iter()
            .min_by(|a, b| a.g2.total_cmp(&b.g2))
            .map(|r| r.zeros.clone());
        c.truth(
            &format!("{label} {model}: minimum G2 at {best:?}, want {side}2=0"),
            best == Some(z(1)),
        );
    }
}

fn criterion1() -> Checks {
    let mut c = Checks::default();
    let t = datasets::smoking_birthweight();
    for model in [ModelId::M1, ModelId::M3, ModelId::M5] {
        let f = fit_unconstrained(&t, model).unwrap();
        c.all_close(
            &format!("{model} alpha"),
            alpha(&f),
            &[0.0493, -0.0237],
            EST_TOL,
        );
    }
    g2_pairs(
        &mut c,
        &t,
        "smoking_birthweight",
        &[
            (ModelId::M1, 55.2198, 12.4682),
            (ModelId::M3, 55.2168, 12.4638),
            (ModelId::M5, 55.214, 12.464),
        ],
        false,
    );
    for model in [ModelId::M1, ModelId::M3, ModelId::M5] {
        let p = zero_probability(&audited(&t, model), Variable::Y1, 1);
        c.truth(
            &format!("{model}: pi_2+2+ = {p:?}"),
            p.is_some_and(|p| p <= BOUNDARY_TOL),
        );
    }
    c
}

fn criterion2() -> Checks {
    let mut c = Checks::default();
    let t = datasets::sparse_margins();
    for (model, a1) in [
        (ModelId::M1, 1.0098),
        (ModelId::M3, 1.0153),
        (ModelId::M5, 1.0153),
    ] {
        let f = fit_unconstrained(&t, model).unwrap();
        c.all_close(&format!("{model} alpha"), alpha(&f), &[a1, -0.0306], G2_TOL);
    }
    g2_pairs(
        &mut c,
        &t,
        "sparse_margins",
        &[
            (ModelId::M1, 426.1604, 17.4704),
            (ModelId::M3, 424.3288, 15.669),
            (ModelId::M5, 424.3188, 15.664),
        ],
        false,
    );
    c
}

fn criterion3() -> Checks {
    let mut c = Checks::default();
    let t = datasets::smoking_birthweight_modified();
    for (model, b1) in [
        (ModelId::M2, 0.2538),
        (ModelId::M4, 0.2543),
        (ModelId::M5, 0.2543),
    ] {
        let f = fit_unconstrained(&t, model).unwrap();
        c.all_close(&format!("{model} beta"), beta(&f), &[b1, -0.0047], G2_TOL);
    }
    g2_pairs(
        &mut c,
        &t,
        "smoking_birthweight_modified",
        &[
            (ModelId::M2, 98.5962, 3.3548),
            (ModelId::M4, 96.1622, 0.922),
            (ModelId::M5, 96.162, 0.9276),
        ],
        true,
    );
    for model in [ModelId::M2, ModelId::M4, ModelId::M5] {
        let p = zero_probability(&audited(&t, model), Variable::Y2, 1);
        c.truth(
            &format!("{model}: pi_+2+2 = {p:?}"),
            p.is_some_and(|p| p <= BOUNDARY_TOL),
        );
    }
    c
}

fn rounded(x: f64) -> f64 {
    let s = 10f64.powi(ODDS_DECIMALS);
    (x * s).round() / s
}

fn odds_rows(c: &mut Checks, label: &str, got: &[PairOdds], want: &[[f64; 4]]) {
    for (p, w) in got.iter().zip(want) {
        let shown: Vec<f64> = p
            .response
            .iter()
            .chain([&p.nonresponse])
            .map(|&x| rounded(x))
            .collect();
        let tag = format!("{label}({},{})", p.first + 1, p.second + 1);
        c.truth(
            &format!("{tag}: shown {shown:?}, want {w:?}"),
            shown.iter().zip(w).all(|(a, b)| (a - b).abs() < 1e-9),
        );
    }
}

/// Fitted odds and the negative entries, both 0-based.
struct Expected {
    model: ModelId,
    alpha: Option<[f64; 3]>,
    beta: Option<[f64; 3]>,
    alpha_neg: &'static [usize],
    beta_neg: &'static [usize],
}

fn table_fits(c: &mut Checks, label: &str, t: &IncompleteTable, rows: &[Expected]) {
    for e in rows {
        let f = fit_unconstrained(t, e.model).unwrap();
        if let Some(a) = e.alpha {
            c.all_close(
                &format!("{label} {} alpha", e.model),
                alpha(&f),
                &a,
                EST_TOL,
            );
        }
        if let Some(b) = e.beta {
            c.all_close(&format!("{label} {} beta", e.model), beta(&f), &b, EST_TOL);
        }
        let want = ZeroSet::new(e.alpha_neg.to_vec(), e.beta_neg.to_vec());
        c.truth(
            &format!(
                "{label} {}: negative set {:?}, want {want:?}",
                e.model, f.negative
            ),
            f.negative == want,
        );
        let r = fit_with_boundary(t, e.model, &BoundaryOptions::default()).unwrap();
        let on_boundary = e
            .alpha_neg
            .iter()
            .all(|&i| r.estimates.alpha.values[i] == 0.0)
            && e.beta_neg
                .iter()
                .all(|&j| r.estimates.beta.values[j] == 0.0)
            && r.boundary.as_ref().is_some_and(|b| b.boundary);
        c.truth(
            &format!("{label} {}: refit not on the stated boundary", e.model),
            on_boundary,
        );
    }
}

fn criterion4() -> Checks {
    let mut c = Checks::default();
    let t = datasets::bone_density_income();
    let p = odds_profile(&t).unwrap();
    odds_rows(
        &mut c,
        "nu",
        &p.nu,
        &[
            [2.14, 1.98, 3.10, 2.92],
            [2.19, 2.22, 5.17, 1.71],
            [1.02, 1.12, 1.67, 0.59],
        ],
    );
    odds_rows(
        &mut c,
        "omega",
        &p.omega,
        &[
            [2.39, 2.21, 2.43, 1.96],
            [6.68, 9.67, 15.78, 5.00],
            [2.80, 4.37, 6.50, 2.56],
        ],
    );
    let inside: Vec<bool> = p.nu.iter().chain(&p.omega).map(|o| o.inside).collect();
    c.truth(
        &format!("membership verdicts {inside:?}"),
        inside == [true, false, false, false, false, false],
    );
    let sc = sufficient_conditions(&p);
    c.truth(
        "both sufficient conditions hold",
        sc.condition1 && sc.condition2,
    );
    table_fits(
        &mut c,
        "bone_density_income",
        &t,
        &[
            Expected {
                model: ModelId::M1,
                alpha: Some([4.5205, -8.2411, -1.6019]),
                beta: None,
                alpha_neg: &[1, 2],
                beta_neg: &[],
            },
            Expected {
                model: ModelId::M2,
                alpha: None,
                beta: Some([0.1008, 1.2338, -0.8060]),
                alpha_neg: &[],
                beta_neg: &[2],
            },
            Expected {
                model: ModelId::M3,
                alpha: Some([4.4716, -8.3197, -1.6962]),
                beta: None,
                alpha_neg: &[1, 2],
                beta_neg: &[],
            },
            Expected {
                model: ModelId::M4,
                alpha: None,
                beta: Some([0.1002, 1.1248, -0.8922]),
                alpha_neg: &[],
                beta_neg: &[2],
            },
            Expected {
                model: ModelId::M5,
                alpha: Some([4.4716, -8.3197, -1.6962]),
                beta: Some([0.1002, 1.1248, -0.8922]),
                alpha_neg: &[1, 2],
                beta_neg: &[2],
            },
        ],
    );
    c
}

fn criterion5() -> Checks {
    let mut c = Checks::default();
    let t = datasets::bone_density_income_modified();
    let p = odds_profile(&t).unwrap();
    c.truth(
        "every pair inside its interval",
        p.nu.iter().chain(&p.omega).all(|o| o.inside),
    );
    table_fits(
        &mut c,
        "bone_density_income_modified",
        &t,
        &[
            Expected {
                model: ModelId::M1,
                alpha: Some([0.6556, -1.0537, 3.4109]),
                beta: None,
                alpha_neg: &[1],
                beta_neg: &[],
            },
            Expected {
                model: ModelId::M2,
                alpha: None,
                beta: Some([0.1355, 0.3420, -0.1846]),
                alpha_neg: &[],
                beta_neg: &[2],
            },
            Expected {
                model: ModelId::M3,
                alpha: Some([0.6534, -1.0551, 3.4874]),
                beta: None,
                alpha_neg: &[1],
                beta_neg: &[],
            },
            Expected {
                model: ModelId::M4,
                alpha: None,
                beta: Some([0.1421, 0.3289, -0.1712]),
                alpha_neg: &[],
                beta_neg: &[2],
            },
            Expected {
                model: ModelId::M5,
                alpha: Some([0.6534, -1.0551, 3.4874]),
                beta: Some([0.1421, 0.3289, -0.1712]),
                alpha_neg: &[1],
                beta_neg: &[2],
            },
        ],
    );
    let r = analyze(&t, &ModelId::ALL, &BoundaryOptions::default()).unwrap();
    for b in &r.models {
        c.truth(
            &format!("{}: verdict \"{}\"", b.model, b.verdict),
            b.verdict == Verdict::BoundaryUnguaranteed,
        );
    }
    c
}

fn criterion6() -> Checks {
    let mut c = Checks::default();
    let t = datasets::bone_density_income_modified();
    let n = necessary_conditions(&t, ModelId::M5).unwrap();
    let c1 = n.condition1.expect("M5 has condition 1");
    let c2 = n.condition2.expect("M5 has condition 2");
    let rhs = |e: &boundary_scan::diagnostics::ConditionEval| {
        e.rows.iter().map(|r| r.rhs).collect::<Vec<_>>()
    };
    c.all_close(
        "condition 1 rhs",
        &rhs(&c1),
        &[955.4516, 421.2802, 347.8693],
        EST_TOL,
    );
    c.all_close(
        "condition 2 rhs",
        &rhs(&c2),
        &[448.38, 186.5217, 33.9578],
        EST_TOL,
    );
    c.truth("condition 1 holds", c1.holds);
    c.truth("condition 2 holds", c2.holds);
    c
}

fn criterion7() -> Checks {
    let mut c = Checks::default();
    let t = datasets::bone_density_income_interior();
    let f = fit_unconstrained(&t, ModelId::M5).unwrap();
    c.all_close("alpha", alpha(&f), &[0.0133, 0.7796, 1.6671], EST_TOL);
    c.all_close("beta", beta(&f), &[0.041, 0.3655, 0.0126], EST_TOL);
    c.truth(
        "all estimates positive",
        alpha(&f).iter().chain(beta(&f)).all(|&v| v > 0.0),
    );
    let n = necessary_conditions(&t, ModelId::M5).unwrap();
    c.truth("necessary conditions hold", n.satisfied);
    let r = analyze(&t, &ModelId::ALL, &BoundaryOptions::default()).unwrap();
    for b in &r.models {
        c.truth(&format!("{}: boundary reported", b.model), !b.boundary);
        c.truth(
            &format!("{}: verdict \"{}\"", b.model, b.verdict),
            b.verdict == Verdict::InteriorUnguaranteed,
        );
    }
    c
}

fn criterion8() -> Checks {
    let mut c = Checks::default();
    let suites = [
        (
            "flagged odds leave the space (1000 square tables)",
            common::flagged_odds_suite(SUITE_SEED, 1000),
        ),
        (
            "dominant systems solve positively (1000 systems)",
            common::positive_solution_suite(SUITE_SEED + 1, 1000),
        ),
        (
            "failed dominance means interior (1000 tables)",
            common::dominance_suite(SUITE_SEED + 2, 1000),
        ),
        (
            "EM monotonicity (examples + 100 random)",
            common::em_monotone_suite(SUITE_SEED + 3, 100),
        ),
        (
            "perfect fit (500 tables)",
            common::perfect_fit_suite(SUITE_SEED + 4, 500),
        ),
        (
            "lambda round trip (200 tables)",
            common::lambda_suite(SUITE_SEED + 5, 200),
        ),
        (
            "audit (datasets + 200 random)",
            common::audit_suite(SUITE_SEED + 6, 200),
        ),
    ];
    for (name, tally) in suites {
        println!("    {name}: {}", tally.summary());
        c.truth(
            &format!("{name}: {} violations", tally.violations.len()),
            tally.ok() && tally.checked > 0,
        );
    }
    c
}

type Criterion = fn() -> Checks;

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 8] = [
        (
            "1 smoking_birthweight estimates, G2 pairs, pi_2+2+ = 0",
            criterion1,
        ),
        (
            "2 sparse_margins estimates, G2 pairs, minimum face",
            criterion2,
        ),
        (
            "3 smoking_birthweight_modified estimates, G2 pairs, pi_+2+2 = 0",
            criterion3,
        ),
        (
            "4 bone_density_income odds, verdicts, fitted odds",
            criterion4,
        ),
        (
            "5 bone_density_income_modified unflagged boundaries",
            criterion5,
        ),
        ("6 dominance right-hand sides", criterion6),
        ("7 interior table", criterion7),
        ("8 property suites", criterion8),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let c = run();
        if c.failures.is_empty() {
            println!("[PASS] criterion {name}");
        } else {
            failed += 1;
            println!("[FAIL] criterion {name}");
            for f in &c.failures {
                println!("    {f}");
            }
        }
    }
    println!("{} of 8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

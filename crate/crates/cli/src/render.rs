//! Plain-text views of reports. Levels are 1-based and numbers carry four
//! decimals.

use std::fmt::Write;

use boundary_scan::diagnostics::{
    ConditionEval, NecessaryConditions, PairOdds, SufficientConditions,
};
use boundary_scan::report::{
    AnalysisReport, CheckReport, InputEcho, ModelBlock, NecessarySection, SufficientSection,
};
use boundary_scan::{OddsVector, ZeroSet};

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.4}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), num)
}

fn odds(v: &OddsVector) -> String {
    let parts: Vec<String> = v.values.iter().map(|&x| num(x)).collect();
    format!("({})", parts.join(", "))
}

fn levels(name: &str, idx: &[usize]) -> Vec<String> {
    idx.iter().map(|i| format!("{name}{}", i + 1)).collect()
}

fn zeros(z: &ZeroSet) -> String {
    let mut all = levels("alpha", &z.alpha);
    all.extend(levels("beta", &z.beta));
    if all.is_empty() {
        "none".into()
    } else {
        all.join(", ")
    }
}

fn input(out: &mut String, e: &InputEcho) {
    let _ = writeln!(out, "table {}x{}, N = {}", e.rows, e.cols, e.total);
}

fn pair(out: &mut String, label: &str, p: &PairOdds) {
    let _ = writeln!(
        out,
        "    {label}({},{}): nonresponse {} in [{}, {}] {}",
        p.first + 1,
        p.second + 1,
        num(p.nonresponse),
        num(p.min),
        num(p.max),
        if p.inside { "inside" } else { "outside" }
    );
}

fn pairs_list(p: &[(usize, usize)]) -> String {
    if p.is_empty() {
        return "none".into();
    }
    p.iter()
        .map(|(a, b)| format!("({},{})", a + 1, b + 1))
        .collect::<Vec<_>>()
        .join(" ")
}

fn holds(b: bool) -> &'static str {
    if b {
        "holds"
    } else {
        "fails"
    }
}

fn conditions(out: &mut String, c: &SufficientConditions) {
    let _ = writeln!(
        out,
        "  condition 1 {} (pairs outside: {})",
        holds(c.condition1),
        pairs_list(&c.condition1_pairs)
    );
    let _ = writeln!(
        out,
        "  condition 2 {} (pairs outside: {})",
        holds(c.condition2),
        pairs_list(&c.condition2_pairs)
    );
    if let Some(note) = &c.scope_note {
        let _ = writeln!(out, "  no guarantee: {note}");
    }
}

fn sufficient(out: &mut String, s: &SufficientSection, detail: bool) {
    let _ = writeln!(out, "sufficient conditions");
    if detail {
        for p in &s.odds.nu {
            pair(out, "nu", p);
        }
        for p in &s.odds.omega {
            pair(out, "omega", p);
        }
    }
    conditions(out, &s.conditions);
}

fn eval(out: &mut String, label: &str, e: &ConditionEval) {
    let _ = writeln!(out, "    {label} {}", holds(e.holds));
    for r in &e.rows {
        let _ = writeln!(
            out,
            "      row {}: {} <= {} {}",
            r.index + 1,
            num(r.lhs),
            num(r.rhs),
            if r.holds { "yes" } else { "no" }
        );
    }
}

fn necessary_conditions(out: &mut String, c: &NecessaryConditions) {
    if let Some(e) = &c.condition1 {
        eval(out, "condition 1", e);
    }
    if let Some(e) = &c.condition2 {
        eval(out, "condition 2", e);
    }
    let _ = writeln!(
        out,
        "    satisfied: {}, guarantee: {}",
        c.satisfied, c.guarantee
    );
}

fn necessary(out: &mut String, n: &NecessarySection) {
    match &n.conditions {
        Some(c) => necessary_conditions(out, c),
        None => {
            let _ = writeln!(out, "    not applicable (I≠J)");
        }
    }
}

fn model(out: &mut String, b: &ModelBlock) {
    let f = &b.fit;
    let e = &f.estimates;
    let _ = writeln!(out, "{}", b.model);
    let _ = writeln!(out, "  G2 {}  loglik {}", opt(f.g2), opt(f.loglik));
    let _ = writeln!(out, "  alpha {}", odds(&e.alpha));
    let _ = writeln!(out, "  beta  {}", odds(&e.beta));
    let _ = writeln!(out, "  g     {}", num(e.g));
    if let Some(u) = &f.unconstrained {
        let _ = writeln!(out, "  unconstrained alpha {}", odds(&u.alpha));
        let _ = writeln!(out, "  unconstrained beta  {}", odds(&u.beta));
    }
    let _ = writeln!(out, "  negative {}", zeros(&f.negative));
    let _ = writeln!(out, "  zeros    {}", zeros(&f.zeros));
    if !f.refits.is_empty() || f.audit_agrees.is_some() {
        for r in &f.refits {
            let _ = writeln!(out, "  refit {}: G2 {}", zeros(&r.zeros), num(r.g2));
        }
        if let Some(a) = f.audit_agrees {
            let _ = writeln!(
                out,
                "  audit {}",
                if a {
                    "agrees"
                } else {
                    "prefers another boundary"
                }
            );
        }
    }
    let _ = writeln!(out, "  necessary conditions");
    necessary(out, &b.necessary);
    if let Some(g) = b.guarantee {
        let _ = writeln!(out, "  guarantee: {g}");
    }
    let _ = writeln!(out, "  verdict: {}", b.verdict);
}

pub fn analysis(r: &AnalysisReport) -> String {
    let mut out = String::new();
    input(&mut out, &r.input);
    sufficient(&mut out, &r.sufficient, false);
    for b in &r.models {
        out.push('\n');
        model(&mut out, b);
    }
    out
}

pub fn check(r: &CheckReport) -> String {
    let mut out = String::new();
    input(&mut out, &r.input);
    if let Some(s) = &r.sufficient {
        sufficient(&mut out, s, true);
    }
    if !r.necessary.is_empty() {
        let _ = writeln!(out, "necessary conditions");
        for n in &r.necessary {
            let _ = writeln!(out, "  {}", n.model);
            necessary(&mut out, n);
        }
    }
    out
}

pub fn batch_line(name: &str, outcome: Result<&AnalysisReport, &str>) -> String {
    match outcome {
        Ok(r) => {
            let parts: Vec<String> = r
                .models
                .iter()
                .map(|b| format!("{} {} [{}]", b.model, opt(b.fit.g2), b.verdict))
                .collect();
            format!("{name}: ok: {}\n", parts.join("; "))
        }
        Err(e) => format!("{name}: error: {e}\n"),
    }
}

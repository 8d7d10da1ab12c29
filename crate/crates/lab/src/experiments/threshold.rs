//! Constraint margin, `α₀`, and the hierarchy of numerical constants.

use anyhow::{Context, Result};
use fnls_core::threshold::{
    alpha0, alpha0_from_quadratic, constraint_margin, constraint_margin_exact, hierarchy_checks, margin_root,
    NumericHierarchy, SigmaSeries,
};
use num_rational::BigRational;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::report::{Recorder, Report};

fn rational(s: &str) -> Result<BigRational> {
    s.trim()
        .parse()
        .with_context(|| format!("`{s}` is not a rational number"))
}

/// The hierarchy with `b₁ = 1/2 + σ²⁰⁰`.
pub fn corrupted(h: &NumericHierarchy) -> NumericHierarchy {
    let mut bad = h.clone();
    bad.b1 = SigmaSeries::monomial(1, 2, 0) + SigmaSeries::monomial(1, 1, 200);
    bad
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rec = Recorder::new(cfg)?;
    let p = &cfg.threshold;

    let closed = alpha0();
    let quad = alpha0_from_quadratic();
    let root = margin_root(p.bracket[0], p.bracket[1])?;
    rec.check(
        11,
        "alpha0 agrees with the quadratic root",
        (closed - quad).abs() < 1e-12 && (closed - root).abs() < 1e-12,
        format!("closed {closed:.15}, quadratic {quad:.15}, bisection {root:.15}"),
    );
    rec.check(
        11,
        "alpha0 is 1.124",
        format!("{closed:.3}") == "1.124",
        format!("{closed:.6}"),
    );
    for (text, want) in [("6/5", "2/25"), ("11/10", "-37/800")] {
        let got = constraint_margin_exact(&rational(text)?);
        rec.check(
            11,
            &format!("margin at alpha = {text}"),
            got == rational(want)?,
            format!("{got} (expected {want})"),
        );
    }

    let base = NumericHierarchy::new(rational(&p.hierarchy_alpha)?);
    let hierarchy = if p.corrupt_b1 { corrupted(&base) } else { base.clone() };
    let report = hierarchy_checks(&hierarchy)?;
    for c in &report.checks {
        rec.check(11, &format!("hierarchy: {}", c.name), c.passed, c.witness.clone());
    }
    let control = hierarchy_checks(&corrupted(&base))?;
    rec.check(
        11,
        "negative control is rejected",
        !control.passed(),
        format!(
            "violations: {}",
            control
                .violations()
                .iter()
                .map(|c| c.name.as_str())
                .collect::<Vec<_>>()
                .join("; ")
        ),
    );

    rec.write("margin.csv", |w| {
        writeln!(w, "alpha,margin")?;
        for i in 0..=100 {
            let a = 1.0 + 0.01 * i as f64;
            writeln!(w, "{a:.2},{:.12e}", constraint_margin(a))?;
        }
        Ok(())
    })?;
    rec.finish(json!({
        "alpha0": closed,
        "alpha0_quadratic": quad,
        "alpha0_bisection": root,
        "hierarchy": report,
        "negative_control": control,
    }))
}

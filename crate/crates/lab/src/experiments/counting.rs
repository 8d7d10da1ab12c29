//! Resonance identity, level-set counting sweeps and the convolution bound.

use anyhow::Result;
use fnls_core::counting::{
    convolution_bound_check, levelset_sweep, log_grid, pair_levelset_count, pair_sweep, write_counting_csv,
    ConvolutionCheck, CountingRecord, Regime, SweepSummary,
};
use fnls_core::spectral::resonance_phi;
use rayon::prelude::*;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::report::{Recorder, Report};

/// First triple in `|k_i| ≤ range` where `Φ` at `α = 2` differs from `−2(k1−k2)(k3−k2)`.
pub fn resonance_identity_violation(range: i64) -> Option<(i64, i64, i64)> {
    (-range..=range).into_par_iter().find_map_first(|k1| {
        for k2 in -range..=range {
            for k3 in -range..=range {
                if resonance_phi(k1, k2, k3, 2.0) != -2.0 * ((k1 - k2) * (k3 - k2)) as f64 {
                    return Some((k1, k2, k3));
                }
            }
        }
        None
    })
}

type Sweep = fn(f64, u64, usize, f64, u64) -> Result<(SweepSummary, Vec<CountingRecord>), fnls_core::Error>;

fn sweeps() -> [(&'static str, Sweep); 3] {
    [
        ("levelset_hll", |a, n, q, e, s| {
            levelset_sweep(a, n, Regime::Hll, e, q, s)
        }),
        ("levelset_hhh", |a, n, q, e, s| {
            levelset_sweep(a, n, Regime::Hhh, e, q, s)
        }),
        ("pair_levelset", |a, n, q, _, s| pair_sweep(a, n, q, s)),
    ]
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rec = Recorder::new(cfg)?;
    let p = &cfg.counting;

    let violation = resonance_identity_violation(p.resonance_range);
    rec.check(
        6,
        "resonance identity at alpha = 2",
        violation.is_none(),
        match violation {
            None => format!("exact over |k_i| <= {}", p.resonance_range),
            Some(t) => format!("fails at {t:?}"),
        },
    );

    let example = pair_levelset_count(0.0, 450.0, 10, 10, 10.0, 2.0)?;
    rec.check(
        7,
        "pair count example",
        example.count == 2,
        format!("count {} (expected 2)", example.count),
    );

    let queries = cfg.samples as usize;
    let jobs: Vec<(usize, f64, u64)> = sweeps()
        .iter()
        .enumerate()
        .flat_map(|(s, _)| {
            p.alphas
                .iter()
                .flat_map(move |&a| p.n_list.iter().map(move |&n| (s, a, n)))
        })
        .collect();
    let results: Vec<(SweepSummary, Vec<CountingRecord>)> = jobs
        .par_iter()
        .map(|&(s, a, n)| Ok((sweeps()[s].1)(a, n, queries, p.eps, cfg.master_seed)?))
        .collect::<Result<_>>()?;
    let summaries: Vec<&SweepSummary> = results.iter().map(|r| &r.0).collect();
    for (name, _) in sweeps() {
        for &alpha in &p.alphas {
            let maxes: Vec<(u64, f64)> = summaries
                .iter()
                .filter(|s| s.family == name && s.alpha == alpha)
                .map(|s| (s.n, s.max_ratio))
                .collect();
            let bounded = maxes.iter().all(|(_, m)| m.is_finite());
            let growth = maxes.windows(2).map(|w| w[1].1 / w[0].1).fold(0.0, f64::max);
            let text: Vec<String> = maxes.iter().map(|(n, m)| format!("N={n}: {m:.3}")).collect();
            rec.check(
                7,
                &format!("{name} constants at alpha = {alpha}"),
                bounded && growth < p.growth_limit,
                format!(
                    "max ratio {}; largest growth {growth:.3} (limit {})",
                    text.join(", "),
                    p.growth_limit
                ),
            );
        }
    }
    rec.write("counting.csv", |w| {
        let rows: Vec<CountingRecord> = results.iter().flat_map(|r| r.1.iter().cloned()).collect();
        Ok(write_counting_csv(w, &rows)?)
    })?;
    rec.write("counting_summary.csv", |w| {
        writeln!(w, "family,alpha,N,queries,max_ratio,mean_ratio,max_count")?;
        for s in &summaries {
            writeln!(
                w,
                "{},{},{},{},{:.6},{:.6},{}",
                s.family, s.alpha, s.n, s.queries, s.max_ratio, s.mean_ratio, s.max_count
            )?;
        }
        Ok(())
    })?;

    let grid = log_grid(p.convolution_grid[0], p.convolution_grid[1], p.convolution_points);
    let checks: Vec<ConvolutionCheck> = p
        .convolution_regimes
        .par_iter()
        .map(|&[s, b]| Ok(convolution_bound_check(s, b, &grid, p.eps)?))
        .collect::<Result<_>>()?;
    for c in &checks {
        rec.check(
            8,
            &format!("convolution slope sigma={} beta={}", c.sigma, c.beta),
            c.slope_matches(p.slope_tolerance),
            format!("slope {:.4} vs -gamma = {:.4}", c.fit.slope, -c.gamma),
        );
    }
    rec.write("convolution.csv", |w| {
        writeln!(w, "sigma,beta,x,integral")?;
        for c in &checks {
            for pt in &c.points {
                writeln!(w, "{},{},{:.6e},{:.12e}", c.sigma, c.beta, pt.x, pt.integral)?;
            }
        }
        Ok(())
    })?;
    rec.finish(json!({
        "pair_example": {"count": example.count, "bound": example.bound},
        "sweeps": summaries,
        "convolution": checks,
    }))
}

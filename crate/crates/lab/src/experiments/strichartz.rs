//! Monte Carlo ratios of the bilinear Strichartz estimate across dyadic scales.

use anyhow::{bail, Result};
use fnls_core::counting::{strichartz_ratio, StrichartzStats};
use fnls_core::Dyadic;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::report::{Recorder, Report};

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rec = Recorder::new(cfg)?;
    let p = &cfg.strichartz;
    let s = 0.5 - cfg.alpha / 4.0 + p.s_offset;
    let (lo, hi) = (Dyadic::new(p.n_min as usize)?, Dyadic::new(cfg.n as usize)?);
    let scales: Vec<Dyadic> = Dyadic::ladder(hi).into_iter().filter(|&d| d >= lo).collect();
    if scales.len() < 2 {
        bail!("need at least two scales between {lo} and {hi}");
    }
    let stats: Vec<StrichartzStats> = scales
        .iter()
        .map(|&n| strichartz_ratio(n, n, cfg.alpha, s, cfg.samples as usize, cfg.master_seed))
        .collect::<Result<_, _>>()?;
    let (first, last) = (stats[0].max_ratio, stats[stats.len() - 1].max_ratio);
    let text: Vec<String> = stats.iter().map(|r| format!("N={}: {:.4}", r.n, r.max_ratio)).collect();
    rec.check(
        9,
        "no increasing trend",
        last <= p.trend_limit * first,
        format!(
            "max ratio {}; last/first {:.3} (limit {})",
            text.join(", "),
            last / first,
            p.trend_limit
        ),
    );
    rec.write("strichartz.csv", |w| {
        writeln!(w, "N,M,alpha,s,samples,max_ratio,mean_ratio")?;
        for r in &stats {
            writeln!(
                w,
                "{},{},{},{},{},{:.12e},{:.12e}",
                r.n, r.m, r.alpha, r.s, r.samples, r.max_ratio, r.mean_ratio
            )?;
        }
        Ok(())
    })?;
    rec.finish(json!({ "s": s, "stats": stats }))
}

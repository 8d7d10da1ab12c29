//! Invariance of the truncated Gibbs measure under the truncated flow.

use anyhow::Result;
use fnls_core::dynamics::{evolve_with, EvolveOptions, Scheme, TimeGrid, Variant};
use fnls_core::random::{GibbsEnsemble, GibbsSampler};
use fnls_core::spectral::{mass, quartic_integral, truncated_hamiltonian};
use fnls_core::stats::{ks_two_sample, KsResult};
use fnls_core::SpectralField;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::report::{Recorder, Report};

/// Observables compared between `t = 0` and `t = T`.
pub const OBSERVABLES: [&str; 6] = ["quartic", "mode0", "mode1", "mode2", "hamiltonian", "mass"];

fn observe(u: &SpectralField, n: usize) -> [f64; 6] {
    [
        quartic_integral(u),
        u.get(0).norm_sqr(),
        u.get(1).norm_sqr(),
        u.get(2).norm_sqr(),
        truncated_hamiltonian(u, n),
        mass(u),
    ]
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceData {
    pub initial: Vec<[f64; 6]>,
    pub evolved: Vec<[f64; 6]>,
    pub acceptance_rate: f64,
}

/// Sample the ensemble and evolve every member to `T`.
pub fn simulate(cfg: &ExperimentConfig) -> Result<InvarianceData> {
    let n = cfg.n as usize;
    let ensemble = GibbsEnsemble::generate(
        &GibbsSampler::tuned(n, cfg.alpha),
        cfg.master_seed,
        cfg.samples as usize,
    )?;
    let opts = EvolveOptions {
        scheme: Scheme::LawsonGauss6,
        ..EvolveOptions::default()
    };
    let finals: Vec<SpectralField> = if cfg.t_final == 0.0 {
        ensemble.samples.clone()
    } else {
        let grid = TimeGrid::over(0.0, cfg.t_final, cfg.dt)?;
        ensemble
            .samples
            .par_iter()
            .map(|u0| {
                let opts = EvolveOptions {
                    store_every: grid.len() - 1,
                    ..opts
                };
                Ok(evolve_with(u0, grid, Variant::TruncatedHam(n), opts)?.last().clone())
            })
            .collect::<Result<_>>()?
    };
    Ok(InvarianceData {
        initial: ensemble.samples.iter().map(|u| observe(u, n)).collect(),
        evolved: finals.iter().map(|u| observe(u, n)).collect(),
        acceptance_rate: ensemble.acceptance_rate,
    })
}

fn column(rows: &[[f64; 6]], c: usize) -> Vec<f64> {
    rows.iter().map(|r| r[c]).collect()
}

fn pathwise_drift(data: &InvarianceData, c: usize) -> f64 {
    data.initial
        .iter()
        .zip(&data.evolved)
        .map(|(a, b)| ((b[c] - a[c]) / a[c]).abs())
        .fold(0.0, f64::max)
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rec = Recorder::new(cfg)?;
    let data = simulate(cfg)?;
    let mut ks: Vec<(&str, KsResult)> = Vec::new();
    for (c, name) in OBSERVABLES.iter().enumerate().take(4) {
        ks.push((
            name,
            ks_two_sample(&column(&data.initial, c), &column(&data.evolved, c))?,
        ));
    }
    for (name, r) in &ks {
        let criterion = matches!(*name, "quartic" | "mode1").then_some(12);
        rec.check(
            criterion,
            &format!("KS {name}"),
            r.passes(),
            format!("statistic {:.4} vs 1% critical {:.4}", r.statistic, r.critical_1pct),
        );
    }
    let m_drift = pathwise_drift(&data, 5);
    let h_drift = pathwise_drift(&data, 4);
    rec.check(
        12,
        "pathwise mass",
        m_drift < 1e-8,
        format!("max relative drift {m_drift:.3e} (limit 1e-8)"),
    );
    rec.check(
        None,
        "pathwise energy",
        h_drift < 1e-7,
        format!("max relative drift {h_drift:.3e} (limit 1e-7)"),
    );

    rec.write("ks.csv", |w| {
        writeln!(w, "observable,statistic,critical_1pct,n,m,passed")?;
        for (name, r) in &ks {
            writeln!(
                w,
                "{name},{:.6},{:.6},{},{},{}",
                r.statistic,
                r.critical_1pct,
                r.n,
                r.m,
                r.passes()
            )?;
        }
        Ok(())
    })?;
    rec.write("observables.csv", |w| {
        let header: Vec<String> = OBSERVABLES
            .iter()
            .flat_map(|o| [format!("{o}_0"), format!("{o}_T")])
            .collect();
        writeln!(w, "sample,{}", header.join(","))?;
        for (i, (a, b)) in data.initial.iter().zip(&data.evolved).enumerate() {
            let cells: Vec<String> = (0..6)
                .flat_map(|c| [format!("{:.12e}", a[c]), format!("{:.12e}", b[c])])
                .collect();
            writeln!(w, "{i},{}", cells.join(","))?;
        }
        Ok(())
    })?;
    let stats: serde_json::Map<String, serde_json::Value> = ks
        .iter()
        .map(|(name, r)| {
            (
                name.to_string(),
                json!({"statistic": r.statistic, "critical_1pct": r.critical_1pct}),
            )
        })
        .collect();
    rec.finish(json!({
        "acceptance_rate": data.acceptance_rate,
        "ks": stats,
        "mass_pathwise_drift": m_drift,
        "hamiltonian_pathwise_drift": h_drift,
    }))
}

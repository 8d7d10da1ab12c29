//! Cauchy differences of the smooth-data solutions `u_n` in `C([0,T]; H^{σ₀})`.

use anyhow::{bail, Result};
use fnls_core::dynamics::{evolve, Trajectory, Variant};
use fnls_core::norms::sobolev_norm;
use fnls_core::random::{sample_gaussian, SeedSpec};
use fnls_core::spectral::project_to;
use fnls_core::stats::{log_log_fit, LinearFit};
use fnls_core::Dyadic;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::report::{Recorder, Report};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CauchySeries {
    pub sample_index: u64,
    pub n: Vec<u64>,
    /// `d_n = sup_t ‖u_{2n}(t) − u_n(t)‖_{H^{σ₀}}`.
    pub d: Vec<f64>,
    pub fit: Option<LinearFit>,
}

impl CauchySeries {
    /// `d_n` strictly decreases over the last `doublings` steps.
    pub fn decreasing(&self, doublings: usize) -> bool {
        self.d.len() > doublings && self.d[self.d.len() - doublings - 1..].windows(2).all(|w| w[1] < w[0])
    }
}

/// `d_n` for `n = n_min, 2n_min, …, N_max/2`, all `u_n` at the Galerkin cutoff `2N_max`.
pub fn cauchy_series(
    alpha: f64,
    n_min: u32,
    n_max: u32,
    t_final: f64,
    dt: f64,
    sigma0: f64,
    seed: SeedSpec,
) -> Result<CauchySeries> {
    let (lo, hi) = (Dyadic::new(n_min as usize)?, Dyadic::new(n_max as usize)?);
    if lo >= hi {
        bail!("need n_min < N_max (got {n_min} and {n_max})");
    }
    let scales: Vec<usize> = Dyadic::ladder(hi)
        .into_iter()
        .filter(|&d| d >= lo)
        .map(|d| d.cutoff())
        .collect();
    let galerkin = 2 * n_max as usize;
    let phi = sample_gaussian(n_max as usize, alpha, seed);
    let trajs: Vec<Trajectory> = scales
        .par_iter()
        .map(|&n| {
            Ok(evolve(
                &project_to(&phi, n).with_cutoff(galerkin),
                t_final,
                dt,
                Variant::FullCubic,
            )?)
        })
        .collect::<Result<_>>()?;
    let d: Vec<f64> = trajs
        .windows(2)
        .map(|w| {
            w[0].fields
                .iter()
                .zip(&w[1].fields)
                .map(|(a, b)| sobolev_norm(&(b - a), sigma0))
                .fold(0.0, f64::max)
        })
        .collect();
    let n: Vec<u64> = scales[..scales.len() - 1].iter().map(|&s| s as u64).collect();
    let fit = if d.len() >= 2 && d.iter().all(|v| *v > 0.0) {
        let x: Vec<f64> = n.iter().map(|&v| v as f64).collect();
        Some(log_log_fit(&x, &d)?)
    } else {
        None
    };
    Ok(CauchySeries {
        sample_index: seed.sample_index,
        n,
        d,
        fit,
    })
}

pub fn sigma0(alpha: f64, gap: f64) -> f64 {
    (alpha - 1.0) / 2.0 - gap
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rec = Recorder::new(cfg)?;
    let p = &cfg.converge;
    let s0 = sigma0(cfg.alpha, p.sigma_gap);
    let series: Vec<CauchySeries> = (0..cfg.samples as u64)
        .map(|i| {
            cauchy_series(
                cfg.alpha,
                p.n_min,
                cfg.n,
                cfg.t_final,
                cfg.dt,
                s0,
                SeedSpec::new(cfg.master_seed, i),
            )
        })
        .collect::<Result<_>>()?;
    let finite = series.iter().all(|s| s.d.iter().all(|v| v.is_finite() && *v > 0.0));
    rec.check(
        None,
        "d_n positive and finite",
        finite,
        format!("{} seeds", series.len()),
    );
    let decreasing = series.iter().filter(|s| s.decreasing(p.doublings)).count();
    let need = (p.pass_fraction * series.len() as f64).ceil() as usize;
    rec.check(
        13,
        "d_n decreasing",
        decreasing >= need,
        format!(
            "{decreasing}/{} seeds decrease over the last {} doublings (need {need})",
            series.len(),
            p.doublings
        ),
    );
    rec.write("cauchy.csv", |w| {
        writeln!(w, "sample,n,d_n")?;
        for s in &series {
            for (n, d) in s.n.iter().zip(&s.d) {
                writeln!(w, "{},{n},{d:.12e}", s.sample_index)?;
            }
        }
        Ok(())
    })?;
    rec.finish(json!({
        "sigma0": s0,
        "seeds_decreasing": decreasing,
        "seeds": series.len(),
        "series": series,
    }))
}

//! Resolution-ansatz decomposition: exactness, error-equation residual and norm scalings.

use anyhow::Result;
use fnls_core::ansatz::{
    build_ansatz, dyadic_solutions, dyadic_solutions_on, kernel_locality, residual_w, scaling_study, write_scaling_csv,
    zeta_series, AnsatzOptions, ScalingSpec,
};
use fnls_core::dynamics::TimeGrid;
use fnls_core::random::SeedSpec;
use fnls_core::stats::log_log_fit;
use fnls_core::Dyadic;
use rayon::prelude::*;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::report::{write_json, Recorder, Report};

/// Sample index, `(N, ‖ζ‖)` series and log-log slope.
type ZetaRun = (u64, Vec<(u64, f64)>, f64);

fn dyadics(list: &[u32]) -> Result<Vec<Dyadic>> {
    Ok(list
        .iter()
        .map(|&n| Dyadic::new(n as usize))
        .collect::<Result<_, _>>()?)
}

/// `residual_w` at `N` for steps `dt` and `dt/2`.
pub fn residual_pair(seed: SeedSpec, alpha: f64, n: Dyadic, t_final: f64, dt: f64, delta: f64) -> Result<(f64, f64)> {
    let opts = AnsatzOptions {
        delta,
        ..AnsatzOptions::default()
    };
    let res = |dt: f64| -> Result<f64> {
        let sol = dyadic_solutions(seed, n, t_final, dt, alpha)?;
        Ok(residual_w(&build_ansatz(n, &sol, opts)?, &sol)?)
    };
    Ok((res(dt)?, res(dt / 2.0)?))
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rec = Recorder::new(cfg)?;
    let p = &cfg.ansatz;
    let seed = SeedSpec::new(cfg.master_seed, 0);
    let opts = AnsatzOptions {
        delta: p.delta,
        ..AnsatzOptions::default()
    };
    let n_list = dyadics(&p.n_list)?;

    let n_max = Dyadic::new(cfg.n as usize)?;
    let solutions = dyadic_solutions(seed, n_max, cfg.t_final, cfg.dt, cfg.alpha)?;
    let telescoping: Vec<(Dyadic, Dyadic, f64)> = n_list
        .iter()
        .filter(|&&n| n <= n_max)
        .map(|&n| {
            let b = build_ansatz(n, &solutions, opts)?;
            Ok((n, b.l_n, b.telescoping_residual()))
        })
        .collect::<Result<_>>()?;
    drop(solutions);
    let worst = telescoping.iter().map(|t| t.2).fold(0.0, f64::max);
    let text: Vec<String> = telescoping
        .iter()
        .map(|(n, l, r)| format!("N={n} (L_N={l}): {r:.1e}"))
        .collect();
    rec.check(10, "telescoping identity", worst < 1e-10, text.join(", "));

    let (coarse, fine) = residual_pair(
        seed,
        cfg.alpha,
        Dyadic::new(p.residual_n as usize)?,
        p.residual_t,
        p.residual_dt,
        p.delta,
    )?;
    rec.check(
        10,
        "residual_w order",
        coarse / fine >= p.residual_ratio,
        format!(
            "{coarse:.3e} -> {fine:.3e}, ratio {:.2} (need >= {})",
            coarse / fine,
            p.residual_ratio
        ),
    );

    let l = Dyadic::new(p.zeta_l as usize)?;
    let zeta: Vec<ZetaRun> = (0..cfg.samples as u64)
        .into_par_iter()
        .map(|i| {
            let series = zeta_series(
                SeedSpec::new(cfg.master_seed, i),
                cfg.alpha,
                &n_list,
                l,
                cfg.t_final,
                cfg.dt,
            )?;
            let (x, y): (Vec<f64>, Vec<f64>) = series.iter().map(|&(n, v)| (n as f64, v)).unzip();
            let slope = log_log_fit(&x, &y)?.slope;
            Ok((i, series, slope))
        })
        .collect::<Result<_>>()?;
    let negative = zeta.iter().filter(|z| z.2 < 0.0).count();
    let need = (p.seed_fraction * zeta.len() as f64).ceil() as usize;
    let slopes: Vec<String> = zeta.iter().map(|z| format!("{:.3}", z.2)).collect();
    rec.check(
        10,
        "zeta L4Linf slope negative",
        negative >= need,
        format!(
            "{negative}/{} seeds negative (need {need}); slopes {}",
            zeta.len(),
            slopes.join(" ")
        ),
    );
    rec.write("zeta_series.csv", |w| {
        writeln!(w, "sample,N,L,zeta_l4_linf")?;
        for (i, series, _) in &zeta {
            for (n, v) in series {
                writeln!(w, "{i},{n},{l},{v:.12e}")?;
            }
        }
        Ok(())
    })?;

    let (ln, ll) = (Dyadic::new(p.locality_n as usize)?, Dyadic::new(p.locality_l as usize)?);
    let grid = TimeGrid::over(0.0, cfg.t_final, cfg.dt)?;
    let scales: Vec<Dyadic> = [ll, ll.half()].into_iter().filter(|s| !s.is_half()).collect();
    let local_sol = dyadic_solutions_on(seed, cfg.alpha, ln, grid, &scales)?;
    let width = ll.value() * ln.value().powf(0.1);
    let far = kernel_locality(ln, ll, &local_sol, width)?;
    rec.check(
        None,
        "kernel difference nearly local",
        far < p.locality_limit,
        format!(
            "mass fraction {far:.4} beyond |k-k*| > {width:.3} at N={ln}, L={ll} (limit {})",
            p.locality_limit
        ),
    );

    let spec = ScalingSpec {
        delta: p.delta,
        eps: p.scaling_eps,
        b: p.scaling_b,
        ..ScalingSpec::default()
    };
    let study = scaling_study(
        seed,
        cfg.alpha,
        &dyadics(&p.scaling_n_list)?,
        p.scaling_t,
        p.scaling_dt,
        spec,
    )?;
    rec.write("scaling.csv", |w| Ok(write_scaling_csv(w, &study.rows)?))?;
    write_json(&rec.path("scaling_fits.json"), &study.fits)?;

    rec.finish(json!({
        "telescoping": telescoping.iter().map(|(n, l, r)| json!({"N": n.to_string(), "L_N": l.to_string(), "residual": r})).collect::<Vec<_>>(),
        "residual_w": {"dt": p.residual_dt, "coarse": coarse, "fine": fine},
        "zeta_slopes": zeta.iter().map(|z| z.2).collect::<Vec<_>>(),
        "kernel_far_fraction": far,
        "scaling_fits": study.fits,
    }))
}

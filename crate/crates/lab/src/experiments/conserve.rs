//! Integrator exactness, conservation of the truncated flow, and gauge equivalence.

use anyhow::Result;
use fnls_core::dynamics::{evolve, evolve_with, gauge_map, EvolveOptions, Scheme, TimeGrid, Trajectory, Variant};
use fnls_core::random::{sample_gaussian, GibbsSampler, SeedSpec};
use fnls_core::spectral::{abs_pow, mass, truncated_hamiltonian};
use fnls_core::SpectralField;
use num_complex::Complex64;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::report::{Recorder, Report};

/// Sup-in-time error of the cubic flow from `A e_k` against `A e^{i(|k|^α+|A|²)t} e_k`.
pub fn single_mode_error(alpha: f64, k: i64, amplitude: f64, t_final: f64, dt: f64) -> Result<f64> {
    let a = Complex64::new(amplitude, 0.0);
    let u0 = SpectralField::mode(alpha, k.unsigned_abs() as usize, k, a);
    let traj = evolve(&u0, t_final, dt, Variant::FullCubic)?;
    let freq = abs_pow(k, alpha) + amplitude * amplitude;
    Ok((0..traj.len())
        .map(|i| {
            let exact = u0.scale(Complex64::from_polar(1.0, freq * traj.time(i)));
            traj.fields[i].l2_distance(&exact)
        })
        .fold(0.0, f64::max))
}

/// Largest relative deviation of `f` along the trajectory from its initial value.
pub fn relative_drift(traj: &Trajectory, f: impl Fn(&SpectralField) -> f64) -> f64 {
    let f0 = f(traj.first());
    traj.fields.iter().map(|u| ((f(u) - f0) / f0).abs()).fold(0.0, f64::max)
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rec = Recorder::new(cfg)?;
    let p = &cfg.conserve;

    let e1 = single_mode_error(cfg.alpha, p.single_mode_k, p.single_mode_amplitude, cfg.t_final, cfg.dt)?;
    let e2 = single_mode_error(
        cfg.alpha,
        p.single_mode_k,
        p.single_mode_amplitude,
        cfg.t_final,
        cfg.dt / 2.0,
    )?;
    rec.check(
        1,
        "single-mode error",
        e1 < 1e-8,
        format!("sup error {e1:.3e} (limit 1e-8)"),
    );
    rec.check(
        1,
        "single-mode order",
        e1 / e2 >= 8.0,
        format!("dt halving ratio {:.2} (need >= 8)", e1 / e2),
    );

    let n = cfg.n as usize;
    let sampler = GibbsSampler::tuned(n, cfg.alpha);
    let (u0, proposals) = sampler.sample(SeedSpec::new(cfg.master_seed, 0))?;
    let grid = TimeGrid::over(0.0, cfg.t_final, cfg.dt)?;
    let opts = EvolveOptions {
        scheme: Scheme::LawsonGauss6,
        ..EvolveOptions::default()
    };
    let traj = evolve_with(&u0, grid, Variant::TruncatedHam(n), opts)?;
    let m_drift = relative_drift(&traj, mass);
    let h_drift = relative_drift(&traj, |u| truncated_hamiltonian(u, n));
    rec.check(
        2,
        "mass drift",
        m_drift < 1e-7,
        format!("relative drift {m_drift:.3e} (limit 1e-7)"),
    );
    rec.check(
        2,
        "energy drift",
        h_drift < 1e-7,
        format!("relative drift {h_drift:.3e} (limit 1e-7)"),
    );
    let (m0, h0) = (mass(&u0), truncated_hamiltonian(&u0, n));
    let stride = (traj.len() / 100).max(1);
    rec.write("conservation.csv", |w| {
        writeln!(w, "t,mass,hamiltonian,mass_rel_drift,hamiltonian_rel_drift")?;
        for i in (0..traj.len()).step_by(stride) {
            let u = &traj.fields[i];
            let (m, h) = (mass(u), truncated_hamiltonian(u, n));
            writeln!(
                w,
                "{},{:.15e},{:.15e},{:.3e},{:.3e}",
                traj.time(i),
                m,
                h,
                ((m - m0) / m0).abs(),
                ((h - h0) / h0).abs()
            )?;
        }
        Ok(())
    })?;

    let gn = p.gauge_n as usize;
    let data = sample_gaussian(gn, cfg.alpha, SeedSpec::new(cfg.master_seed, 1));
    let cubic = evolve(&data, p.gauge_t, cfg.dt, Variant::FullCubic)?;
    let wick = evolve(&data, p.gauge_t, cfg.dt, Variant::WickGauged)?;
    let gauge_gap = gauge_map(&cubic).sup_distance(&wick)?;
    rec.check(
        3,
        "gauge equivalence",
        gauge_gap < 1e-6,
        format!("sup difference {gauge_gap:.3e} at n = {gn} (limit 1e-6)"),
    );

    rec.finish(json!({
        "single_mode_error": e1,
        "single_mode_error_half_dt": e2,
        "gibbs_proposals": proposals,
        "mass_rel_drift": m_drift,
        "hamiltonian_rel_drift": h_drift,
        "gauge_sup_difference": gauge_gap,
    }))
}

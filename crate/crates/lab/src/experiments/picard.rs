//! The `κ_j` recurrence and Monte Carlo moments of the Picard iterates.

use anyhow::Result;
use fnls_core::picard::{linear_second_moment, moment_bound_check, to_f64, write_moment_csv, KappaSequence};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::report::{Recorder, Report};

/// `(2j−1)!!/j!` in exact arithmetic.
pub fn kappa_closed_form(j: usize) -> BigRational {
    let odd: BigInt = (1..=j as u64).map(|m| BigInt::from(2 * m - 1)).product();
    let fact: BigInt = (1..=j as u64).map(BigInt::from).product();
    BigRational::new(odd, fact)
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rec = Recorder::new(cfg)?;
    let p = &cfg.picard;

    let seq = KappaSequence::new(p.kappa_j_max + 1);
    let mismatch = (0..=p.kappa_j_max).find(|&j| seq.get(j) != &kappa_closed_form(j));
    rec.check(
        4,
        "kappa closed form",
        mismatch.is_none(),
        match mismatch {
            None => format!("exact for j <= {}", p.kappa_j_max),
            Some(j) => format!("first mismatch at j = {j}"),
        },
    );
    let target = (1.0 - 2.0 * p.z).powf(-0.5);
    let mut gf_ok = true;
    let mut gf_rows = Vec::new();
    for j in 0..=p.kappa_j_max {
        let err = (seq.partial_sum(j, p.z) - target).abs();
        let bound = seq.tail_bound(j, p.z);
        gf_ok &= err < bound;
        gf_rows.push((j, err, bound));
    }
    rec.check(
        4,
        "generating function partial sums",
        gf_ok,
        format!(
            "|S_J - {target:.15}| below 2 kappa_(J+1) z^(J+1) for J <= {}; final error {:.3e}",
            p.kappa_j_max,
            gf_rows.last().map_or(f64::NAN, |r| r.1)
        ),
    );
    rec.write("kappa.csv", |w| {
        writeln!(w, "j,kappa,kappa_f64,partial_sum_error,tail_bound")?;
        for &(j, err, bound) in &gf_rows {
            writeln!(
                w,
                "{j},{},{:.17e},{err:.6e},{bound:.6e}",
                seq.get(j),
                to_f64(seq.get(j))
            )?;
        }
        Ok(())
    })?;

    let n = cfg.n as usize;
    let samples = cfg.samples as usize;
    let zeroth = moment_bound_check(0, n, cfg.alpha, &p.times, cfg.dt, samples, cfg.master_seed)?;
    let exact = linear_second_moment(n, cfg.alpha);
    for r in &zeroth {
        let z = (r.empirical_mean - exact) / r.std_error;
        rec.check(
            5,
            &format!("j=0 mean at t={}", r.t),
            z.abs() <= 3.0,
            format!("mean {:.5} vs {exact:.5}, {z:+.2} standard errors", r.empirical_mean),
        );
    }
    let first = moment_bound_check(1, n, cfg.alpha, &p.times, cfg.dt, samples, cfg.master_seed)?;
    let (lo, hi) = first.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
        (lo.min(r.ratio), hi.max(r.ratio))
    });
    rec.check(
        5,
        "j=1 ratio spread",
        hi / lo < 2.0,
        format!("ratio to t^2 3! kappa_1^2 in [{lo:.4}, {hi:.4}], spread {:.3}", hi / lo),
    );
    let rows: Vec<_> = zeroth.iter().chain(&first).cloned().collect();
    rec.write("moments.csv", |w| Ok(write_moment_csv(w, &rows)?))?;
    rec.finish(json!({
        "linear_second_moment": exact,
        "moments": rows,
        "j1_ratio_spread": hi / lo,
    }))
}

//! Resolution-ansatz decomposition `y_N = f_N + Σ_L ζ_L^N + w_N` built from simulated
//! Wick-ordered trajectories, and the norm scalings of its pieces.
//!
//! All `v_N` share one random datum and one Galerkin cutoff `K = 2·N_max`. The
//! high–low–low pieces `ψ_L^N` live on `|k| ≤ N`.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    evolve_with, linear_propagate, solve_kernel_applied, solve_kernel_on, EvolveOptions, KernelTrajectory, TimeGrid,
    Trajectory, Variant,
};
use crate::error::{invalid, Error, Result};
use crate::norms::{fl_norm, mixed_norm, sobolev_norm, xsb_norm, NormParams};
use crate::picard::duhamel;
use crate::random::{sample_gaussian, SeedSpec};
use crate::spectral::{project, project_to, trilinear_n0, trilinear_n3, Dyadic, ProjectionMode, SpectralField};
use crate::stats::{log_log_fit, LinearFit};

/// Ladder depth used at desk scale.
pub const DEFAULT_DELTA: f64 = 0.05;

/// `L_N`: the largest dyadic `L` (possibly `1/2`) with `L < N^{1−δ}`.
pub fn ladder_top(n: Dyadic, delta: f64) -> Dyadic {
    let x = n.exponent() as f64 * (1.0 - delta);
    let j = (x - 1e-12).ceil() as i32 - 1;
    Dyadic::from_exponent(j.max(-1))
}

/// Wick-ordered solutions `v_N` for dyadic `N` with data `Π_N φ^ω`.
#[derive(Clone, Debug)]
pub struct DyadicSolutions {
    pub seed: SeedSpec,
    pub alpha: f64,
    pub n_max: Dyadic,
    /// Galerkin cutoff shared by all solutions.
    pub galerkin: usize,
    pub grid: TimeGrid,
    /// `φ^ω` up to `|k| ≤ N_max`.
    pub phi: SpectralField,
    pub v: BTreeMap<Dyadic, Trajectory>,
}

impl DyadicSolutions {
    pub fn get(&self, n: Dyadic) -> Result<&Trajectory> {
        self.v.get(&n).ok_or_else(|| Error::MissingTrajectory(n.to_string()))
    }

    /// `P_N φ^ω` at cutoff `N`.
    pub fn shell_data(&self, n: Dyadic) -> SpectralField {
        project(&self.phi.with_cutoff(n.cutoff()), n, ProjectionMode::Shell)
    }
}

/// Solve for every dyadic `N ≤ N_max`, including `N = 1/2`.
pub fn dyadic_solutions(seed: SeedSpec, n_max: Dyadic, t_final: f64, dt: f64, alpha: f64) -> Result<DyadicSolutions> {
    let grid = TimeGrid::over(0.0, t_final, dt)?;
    dyadic_solutions_on(seed, alpha, n_max, grid, &Dyadic::ladder(n_max))
}

/// Solve for the listed scales only.
pub fn dyadic_solutions_on(
    seed: SeedSpec,
    alpha: f64,
    n_max: Dyadic,
    grid: TimeGrid,
    scales: &[Dyadic],
) -> Result<DyadicSolutions> {
    if n_max.is_half() {
        return Err(invalid("N_max must be at least 1"));
    }
    if let Some(bad) = scales.iter().find(|&&s| s > n_max) {
        return Err(invalid(format!("scale {bad} exceeds N_max = {n_max}")));
    }
    let galerkin = 2 * n_max.cutoff();
    let phi = sample_gaussian(n_max.cutoff(), alpha, seed);
    let v = scales
        .par_iter()
        .map(|&n| {
            let u0 = project_to(&phi, n.cutoff()).with_cutoff(galerkin);
            evolve_with(&u0, grid, Variant::WickGauged, EvolveOptions::default()).map(|t| (n, t))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(DyadicSolutions {
        seed,
        alpha,
        n_max,
        galerkin,
        grid,
        phi,
        v,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnsatzOptions {
    pub delta: f64,
    /// Replace every background `Π_L v_L` by zero.
    pub zero_background: bool,
    /// Solve the full kernels `H^{N,L}` and obtain `ψ_L^N` by contraction.
    pub with_kernels: bool,
}

impl Default for AnsatzOptions {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            zero_background: false,
            with_kernels: false,
        }
    }
}

/// Pieces of `y_N = f_N + Σ_{1/2<L≤L_N} ζ_L^N + w_N`.
#[derive(Clone, Debug)]
pub struct AnsatzBundle {
    pub n: Dyadic,
    pub l_n: Dyadic,
    pub seed: SeedSpec,
    pub t_final: f64,
    pub options: AnsatzOptions,
    pub y_n: Trajectory,
    pub f_n: Trajectory,
    /// `ψ_L^N` for `1/2 ≤ L ≤ L_N`, with `ψ_{1/2}^N = f_N`.
    pub psi: BTreeMap<Dyadic, Trajectory>,
    /// `ζ_L^N` for `1/2 ≤ L ≤ L_N`, with `ζ_{1/2}^N = 0`.
    pub zeta: BTreeMap<Dyadic, Trajectory>,
    pub w_n: Trajectory,
    pub kernels: BTreeMap<Dyadic, KernelTrajectory>,
}

fn zeros_like(grid: &TimeGrid, alpha: f64, cutoff: usize) -> Trajectory {
    Trajectory {
        fields: vec![SpectralField::zeros(alpha, cutoff); grid.len()],
        t0: grid.t0,
        dt: grid.dt,
        variant: Variant::Linear,
    }
}

fn padded(t: &Trajectory, cutoff: usize) -> Trajectory {
    t.map(|f| f.with_cutoff(cutoff))
}

/// Background `Π_L v_L` feeding `ψ_L^N`; zero at `L = 1/2` and under the test hook.
fn background(l: Dyadic, solutions: &DyadicSolutions, zero: bool) -> Result<Trajectory> {
    if zero || l.is_half() {
        return Ok(zeros_like(&solutions.grid, solutions.alpha, l.cutoff()));
    }
    Ok(solutions.get(l)?.map(|f| f.with_cutoff(l.cutoff())))
}

/// `ψ_L^N` on the solution grid.
fn psi_for(
    n: Dyadic,
    l: Dyadic,
    solutions: &DyadicSolutions,
    opts: &AnsatzOptions,
) -> Result<(Trajectory, Option<KernelTrajectory>)> {
    let data = solutions.shell_data(n);
    if l.is_half() {
        return Ok((free_flow(&data, &solutions.grid), None));
    }
    let bg = background(l, solutions, opts.zero_background)?;
    if opts.with_kernels {
        let kernel = solve_kernel_on(n, l, &bg, &solutions.grid)?;
        let psi = Trajectory {
            fields: (0..kernel.len()).map(|i| kernel.apply(i, &data)).collect(),
            t0: kernel.t0,
            dt: kernel.dt,
            variant: Variant::Linear,
        };
        Ok((psi, Some(kernel)))
    } else {
        Ok((solve_kernel_applied(n, l, &bg, &solutions.grid, &data)?, None))
    }
}

fn free_flow(data: &SpectralField, grid: &TimeGrid) -> Trajectory {
    Trajectory {
        fields: (0..grid.len()).map(|i| linear_propagate(data, grid.time(i))).collect(),
        t0: grid.t0,
        dt: grid.dt,
        variant: Variant::Linear,
    }
}

/// Decompose `y_N = v_N − v_{N/2}` along the ladder `1/2 ≤ L ≤ L_N`.
pub fn build_ansatz(n: Dyadic, solutions: &DyadicSolutions, opts: AnsatzOptions) -> Result<AnsatzBundle> {
    if n.is_half() || n > solutions.n_max {
        return Err(invalid(format!("N = {n} must lie in [1, {}]", solutions.n_max)));
    }
    let l_n = ladder_top(n, opts.delta);
    let k = solutions.galerkin;
    let y_n = solutions.get(n)?.zip_with(solutions.get(n.half())?, |a, b| a - b)?;
    let ladder = Dyadic::ladder(l_n);
    for &l in ladder.iter().filter(|l| !l.is_half()) {
        if !opts.zero_background {
            solutions.get(l)?;
        }
    }
    let pieces = ladder
        .par_iter()
        .map(|&l| psi_for(n, l, solutions, &opts).map(|p| (l, p)))
        .collect::<Result<Vec<_>>>()?;
    let mut psi = BTreeMap::new();
    let mut kernels = BTreeMap::new();
    for (l, (p, kernel)) in pieces {
        psi.insert(l, p);
        if let Some(kernel) = kernel {
            kernels.insert(l, kernel);
        }
    }
    let f_n = psi[&Dyadic::HALF].clone();
    let mut zeta = BTreeMap::new();
    zeta.insert(Dyadic::HALF, zeros_like(&solutions.grid, solutions.alpha, n.cutoff()));
    for &l in ladder.iter().filter(|l| !l.is_half()) {
        zeta.insert(l, psi[&l].zip_with(&psi[&l.half()], |a, b| a - b)?);
    }
    let w_n = y_n.zip_with(&padded(&psi[&l_n], k), |a, b| a - b)?;
    Ok(AnsatzBundle {
        n,
        l_n,
        seed: solutions.seed,
        t_final: solutions.grid.t_final(),
        options: opts,
        y_n,
        f_n,
        psi,
        zeta,
        w_n,
        kernels,
    })
}

impl AnsatzBundle {
    /// `sup_t ‖y_N − f_N − Σ_L ζ_L^N − w_N‖_{l²}`.
    pub fn telescoping_residual(&self) -> f64 {
        let k = self.y_n.n_max();
        (0..self.y_n.len())
            .map(|i| {
                let mut acc = &self.y_n.fields[i] - &self.w_n.fields[i];
                acc = &acc - &self.f_n.fields[i].with_cutoff(k);
                for z in self.zeta.values() {
                    acc = &acc - &z.fields[i].with_cutoff(k);
                }
                acc.l2()
            })
            .fold(0.0, f64::max)
    }
}

/// Wick nonlinearity `N(v) = −N₃(v,v,v) + N₀(v,v,v)` at the cutoff of `v`.
fn wick(v: &SpectralField) -> SpectralField {
    &trilinear_n0(v, v, v) - &trilinear_n3(v, v, v, Some(v.n_max()))
}

/// Right-hand side of the error equation for `w_N` at every sample.
fn error_forcing(bundle: &AnsatzBundle, solutions: &DyadicSolutions) -> Result<Vec<SpectralField>> {
    let k = solutions.galerkin;
    let l = bundle.l_n;
    let psi = &bundle.psi[&l];
    let low = solutions.get(bundle.n.half())?;
    let bg = background(l, solutions, bundle.options.zero_background)?;
    let n = bundle.n.cutoff();
    (0..bundle.w_n.len())
        .into_par_iter()
        .map(|i| {
            let p = psi.fields[i].with_cutoff(k);
            let vlow = &low.fields[i];
            let full = &(&bundle.w_n.fields[i] + &p) + vlow;
            let mut r = &wick(&full) - &wick(vlow);
            let a = &bg.fields[i];
            let hll = trilinear_n3(&psi.fields[i], a, a, Some(n)).with_cutoff(k);
            r = &r + &(&hll * Complex64::new(2.0, 0.0));
            Ok(r)
        })
        .collect()
}

/// `sup_t ‖w_N(t) + i∫_0^t S(t−s) R(s) ds‖_{l²}`, the defect of `w_N` in the integral
/// form of its equation `(i∂_t + |D|^α) w_N = R`, `w_N(0) = 0`.
pub fn residual_w(bundle: &AnsatzBundle, solutions: &DyadicSolutions) -> Result<f64> {
    let forcing = error_forcing(bundle, solutions)?;
    // duhamel returns i∫S(t−s)R ds; the solution is its negative
    let integral = duhamel(&forcing, &solutions.grid, solutions.alpha);
    Ok(bundle
        .w_n
        .fields
        .iter()
        .zip(&integral.fields)
        .map(|(w, d)| (w + d).l2())
        .fold(0.0, f64::max))
}

/// Parameters of the scaling study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub delta: f64,
    /// Loss `ε` in the regularity exponents `α − 1 − ε` and `α/2 − ε`.
    pub eps: f64,
    /// Modulation exponent of the `X^{0,b}` proxy for `w_N`.
    pub b: f64,
    pub oversample: usize,
}

impl Default for ScalingSpec {
    fn default() -> Self {
        Self {
            delta: DEFAULT_DELTA,
            eps: 0.05,
            b: 0.55,
            oversample: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: u64,
    /// Dyadic label of `L`, empty for rows about `w_N`.
    pub l: String,
    pub norm_name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub norm_name: String,
    /// `"N"` for a fit across `N` at fixed `L`, `"L"` across `L` at fixed `N`.
    pub variable: String,
    pub fixed: String,
    pub fit: LinearFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub seed: SeedSpec,
    pub alpha: f64,
    pub t_final: f64,
    pub rows: Vec<ScalingRow>,
    pub fits: Vec<ScalingFit>,
}

pub const ZETA_NORMS: [&str; 3] = ["zeta_l4_linf", "zeta_linf_h", "zeta_linf_fl"];

/// `‖ζ‖_{L⁴_t L^∞_x}`, `‖ζ‖_{L^∞_t H^{α−1−ε}}` and `‖ζ‖_{L^∞_t FL^{α/2−ε,∞}}` over `[0, T]`.
pub fn zeta_norms(zeta: &Trajectory, alpha: f64, eps: f64) -> Result<[f64; 3]> {
    let t_final = zeta.time(zeta.len() - 1);
    let l4 = mixed_norm(zeta, 4.0, f64::INFINITY, (zeta.t0, t_final))?;
    let h = zeta
        .fields
        .iter()
        .map(|f| sobolev_norm(f, alpha - 1.0 - eps))
        .fold(0.0, f64::max);
    let fl = zeta
        .fields
        .iter()
        .map(|f| fl_norm(f, alpha / 2.0 - eps, f64::INFINITY))
        .fold(0.0, f64::max);
    Ok([l4, h, fl])
}

/// Tabulate the `ζ_L^N` norms and the `X^{0,b}` proxy of `w_N` for each `N`, then fit
/// log-log slopes in `N` at fixed `L` and in `L` at fixed `N`.
pub fn scaling_study(
    seed: SeedSpec,
    alpha: f64,
    n_list: &[Dyadic],
    t_final: f64,
    dt: f64,
    spec: ScalingSpec,
) -> Result<ScalingStudy> {
    let n_max = *n_list.iter().max().ok_or_else(|| invalid("empty N list"))?;
    let solutions = dyadic_solutions(seed, n_max, t_final, dt, alpha)?;
    let opts = AnsatzOptions {
        delta: spec.delta,
        ..AnsatzOptions::default()
    };
    let window = NormParams::new(0.0, spec.b, 2.0, 0.5 * t_final, spec.oversample)?.centered(0.5 * t_final);
    let mut rows = Vec::new();
    for &n in n_list {
        let bundle = build_ansatz(n, &solutions, opts)?;
        for (&l, z) in &bundle.zeta {
            let values = if l.is_half() {
                [0.0; 3]
            } else {
                zeta_norms(z, alpha, spec.eps)?
            };
            for (name, value) in ZETA_NORMS.iter().zip(values) {
                rows.push(ScalingRow {
                    n: n.cutoff() as u64,
                    l: l.to_string(),
                    norm_name: name.to_string(),
                    value,
                });
            }
        }
        rows.push(ScalingRow {
            n: n.cutoff() as u64,
            l: String::new(),
            norm_name: "w_x0b".into(),
            value: xsb_norm(&bundle.w_n, &window)?,
        });
    }
    let fits = fit_rows(&rows)?;
    Ok(ScalingStudy {
        seed,
        alpha,
        t_final,
        rows,
        fits,
    })
}

fn fit_rows(rows: &[ScalingRow]) -> Result<Vec<ScalingFit>> {
    let mut fits = Vec::new();
    let label_value = |l: &str| -> f64 {
        if l == "1/2" {
            0.5
        } else {
            l.parse().unwrap_or(f64::NAN)
        }
    };
    for name in ZETA_NORMS {
        let mine: Vec<&ScalingRow> = rows.iter().filter(|r| r.norm_name == name && r.value > 0.0).collect();
        let mut by_l: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        let mut by_n: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
        for r in &mine {
            by_l.entry(r.l.clone()).or_default().push((r.n as f64, r.value));
            by_n.entry(r.n).or_default().push((label_value(&r.l), r.value));
        }
        for (l, pts) in by_l.into_iter().filter(|(_, p)| p.len() >= 2) {
            let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            fits.push(ScalingFit {
                norm_name: name.into(),
                variable: "N".into(),
                fixed: format!("L={l}"),
                fit: log_log_fit(&x, &y)?,
            });
        }
        for (n, pts) in by_n.into_iter().filter(|(_, p)| p.len() >= 2) {
            let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            fits.push(ScalingFit {
                norm_name: name.into(),
                variable: "L".into(),
                fixed: format!("N={n}"),
                fit: log_log_fit(&x, &y)?,
            });
        }
    }
    Ok(fits)
}

/// `‖ζ_L^N‖_{L⁴_t L^∞_x}` for each `N` in `n_list` at one fixed `L`, solving only the
/// backgrounds `v_L` and `v_{L/2}`.
pub fn zeta_series(
    seed: SeedSpec,
    alpha: f64,
    n_list: &[Dyadic],
    l: Dyadic,
    t_final: f64,
    dt: f64,
) -> Result<Vec<(u64, f64)>> {
    if l.is_half() {
        return Err(invalid("ζ at L = 1/2 vanishes identically"));
    }
    let n_max = *n_list.iter().max().ok_or_else(|| invalid("empty N list"))?;
    if n_list.iter().any(|&n| n <= l) {
        return Err(invalid(format!("every N must exceed L = {l}")));
    }
    let grid = TimeGrid::over(0.0, t_final, dt)?;
    let scales: Vec<Dyadic> = [l, l.half()].into_iter().filter(|s| !s.is_half()).collect();
    let solutions = dyadic_solutions_on(seed, alpha, n_max, grid, &scales)?;
    let opts = AnsatzOptions::default();
    n_list
        .par_iter()
        .map(|&n| {
            let (hi, _) = psi_for(n, l, &solutions, &opts)?;
            let (lo, _) = psi_for(n, l.half(), &solutions, &opts)?;
            let zeta = hi.zip_with(&lo, |a, b| a - b)?;
            Ok((
                n.cutoff() as u64,
                mixed_norm(&zeta, 4.0, f64::INFINITY, (0.0, t_final))?,
            ))
        })
        .collect()
}

/// Largest fraction, over the time samples, of `Σ|h_{kk*}|²` carried by
/// `|k − k*| > width` for `h^{N,L} = H^{N,L} − H^{N,L/2}`.
pub fn kernel_locality(n: Dyadic, l: Dyadic, solutions: &DyadicSolutions, width: f64) -> Result<f64> {
    let kernel = |s: Dyadic| -> Result<KernelTrajectory> {
        let bg = background(s, solutions, false)?;
        if s.is_half() {
            // zero background: the kernel is the free propagator
            return solve_kernel_on(
                n,
                Dyadic::ONE,
                &zeros_like(&solutions.grid, solutions.alpha, 1),
                &solutions.grid,
            );
        }
        solve_kernel_on(n, s, &bg, &solutions.grid)
    };
    let h = kernel(l)?.difference(&kernel(l.half())?)?;
    Ok((0..h.len())
        .map(|i| h.off_diagonal_fraction(i, width))
        .fold(0.0, f64::max))
}

pub fn write_scaling_csv<W: Write>(mut w: W, rows: &[ScalingRow]) -> Result<()> {
    writeln!(w, "N,L,norm_name,value")?;
    for r in rows {
        writeln!(w, "{},{},{},{:.12e}", r.n, r.l, r.norm_name, r.value)?;
    }
    Ok(())
}

//! Time integration of the truncated, Wick-ordered and linearized flows.
//!
//! All flows share the form `v_t = i|D|^α v + F(t, v)` and are advanced with Lawson
//! schemes (RK4 or Gauss–Legendre collocation in the interaction picture), so the
//! dispersive phase is applied exactly and the free flow is reproduced to rounding.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::{abs_pow, cubic_product, mass, project_to, trilinear_n0, trilinear_n3, Dyadic, SpectralField};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Which nonlinearity drives the flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `F = i P_K(|v|²v)` at the field cutoff `K`.
    FullCubic,
    /// `F = i Π_n(|Π_n v|² Π_n v)`; modes above `n` evolve freely.
    TruncatedHam(usize),
    /// Gauged flow `F = i(N₃(v,v,v) − N₀(v,v,v))`.
    WickGauged,
    /// Free evolution (no nonlinearity).
    Linear,
}

/// Uniform time grid `t0 + i·dt`, `i = 0..=steps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    /// Grid covering `[t0, t0 + T]`; `dt` must divide `T`.
    pub fn over(t0: f64, t_final: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !(t_final >= 0.0) || !t0.is_finite() {
            return Err(invalid(format!("bad time grid: t0 = {t0}, T = {t_final}, dt = {dt}")));
        }
        let steps = (t_final / dt).round();
        if (steps * dt - t_final).abs() > 1e-9 * t_final.max(dt) {
            return Err(invalid(format!("dt = {dt} does not divide T = {t_final}")));
        }
        Ok(Self {
            t0,
            dt,
            steps: steps as usize,
        })
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t_final(&self) -> f64 {
        self.time(self.steps)
    }
}

/// Time-sampled solution on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub fields: Vec<SpectralField>,
    pub t0: f64,
    pub dt: f64,
    pub variant: Variant,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid {
            t0: self.t0,
            dt: self.dt,
            steps: self.len().saturating_sub(1),
        }
    }

    pub fn first(&self) -> &SpectralField {
        &self.fields[0]
    }

    pub fn last(&self) -> &SpectralField {
        self.fields.last().expect("empty trajectory")
    }

    pub fn alpha(&self) -> f64 {
        self.fields[0].alpha()
    }

    pub fn n_max(&self) -> usize {
        self.fields[0].n_max()
    }

    /// Keep every `stride`-th sample.
    pub fn thin(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        Self {
            fields: self.fields.iter().step_by(stride).cloned().collect(),
            t0: self.t0,
            dt: self.dt * stride as f64,
            variant: self.variant,
        }
    }

    /// Apply `f` to every sample, keeping the grid.
    pub fn map(&self, f: impl Fn(&SpectralField) -> SpectralField) -> Self {
        Self {
            fields: self.fields.iter().map(f).collect(),
            ..self.header_clone()
        }
    }

    fn header_clone(&self) -> Self {
        Self {
            fields: Vec::new(),
            t0: self.t0,
            dt: self.dt,
            variant: self.variant,
        }
    }

    /// Sample-wise combination of two trajectories on the same grid.
    pub fn zip_with(&self, other: &Self, f: impl Fn(&SpectralField, &SpectralField) -> SpectralField) -> Result<Self> {
        if self.len() != other.len() || !same_time(self.t0, other.t0, self.dt) || !same_time(self.dt, other.dt, self.dt)
        {
            return Err(Error::GridMismatch(
                "trajectories are sampled on different grids".into(),
            ));
        }
        Ok(Self {
            fields: self.fields.iter().zip(&other.fields).map(|(a, b)| f(a, b)).collect(),
            ..self.header_clone()
        })
    }

    /// Largest coefficient difference over all samples.
    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::GridMismatch(format!(
                "{} vs {} samples",
                self.len(),
                other.len()
            )));
        }
        Ok(self
            .fields
            .iter()
            .zip(&other.fields)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max))
    }

    pub fn masses(&self) -> Vec<f64> {
        self.fields.iter().map(mass).collect()
    }

    /// JSON lines: a header record, then one field per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = TrajectoryHeader {
            t0: self.t0,
            dt: self.dt,
            variant: self.variant,
            len: self.len(),
        };
        serde_json::to_writer(&mut w, &header)?;
        writeln!(w)?;
        for f in &self.fields {
            serde_json::to_writer(&mut w, f)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header: TrajectoryHeader = match lines.next() {
            Some(line) => serde_json::from_str(&line?)?,
            None => return Err(invalid("empty trajectory file")),
        };
        let mut fields = Vec::with_capacity(header.len);
        for line in lines {
            let line = line?;
            if !line.trim().is_empty() {
                fields.push(serde_json::from_str::<SpectralField>(&line)?);
            }
        }
        if fields.len() != header.len {
            return Err(invalid(format!(
                "header announces {} samples, found {}",
                header.len,
                fields.len()
            )));
        }
        Ok(Self {
            fields,
            t0: header.t0,
            dt: header.dt,
            variant: header.variant,
        })
    }

    /// CSV `t,k,magnitude` of every `stride`-th sample.
    pub fn write_magnitude_csv<W: Write>(&self, mut w: W, stride: usize) -> Result<()> {
        writeln!(w, "t,k,magnitude")?;
        for (i, f) in self.fields.iter().enumerate().step_by(stride.max(1)) {
            let t = self.time(i);
            for (k, c) in f.modes() {
                writeln!(w, "{t},{k},{}", c.norm())?;
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TrajectoryHeader {
    t0: f64,
    dt: f64,
    variant: Variant,
    len: usize,
}

fn same_time(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale.abs().max(1e-300)
}

/// Free propagator `û(k) ↦ e^{it|k|^α} û(k)`.
pub fn linear_propagate(u: &SpectralField, t: f64) -> SpectralField {
    let alpha = u.alpha();
    u.map(|k, c| c * Complex64::from_polar(1.0, t * abs_pow(k, alpha)))
}

/// Runge–Kutta tableau used inside the interaction picture.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Classical explicit RK4.
    #[default]
    LawsonRk4,
    /// Two-stage Gauss–Legendre (order 4, implicit). Conserves mass to the
    /// fixed-point tolerance and keeps the energy error bounded.
    LawsonGauss,
    /// Three-stage Gauss–Legendre (order 6, implicit); same invariants as `LawsonGauss`.
    LawsonGauss6,
}

/// Options for [`evolve_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    /// Multiplies the nonlinearity; `0` gives the free flow.
    pub nonlinear_scale: f64,
    /// Store every `store_every`-th step.
    pub store_every: usize,
    pub scheme: Scheme,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            nonlinear_scale: 1.0,
            store_every: 1,
            scheme: Scheme::LawsonRk4,
        }
    }
}

#[derive(Clone, Copy)]
enum Stage {
    Start,
    Mid,
    End,
}

/// Phase factors `e^{i(h/2)ω_r}` for each row.
fn half_step_phases(omega: &[f64], h: f64) -> Vec<Complex64> {
    omega.iter().map(|w| Complex64::from_polar(1.0, 0.5 * h * w)).collect()
}

fn rotate(x: &mut [Complex64], half: &[Complex64]) {
    let rows = half.len();
    for (i, z) in x.iter_mut().enumerate() {
        *z *= half[i % rows];
    }
}

/// One Lawson RK4 step. `x` is column-major with `half.len()` rows.
fn lawson_step(
    x: &mut [Complex64],
    half: &[Complex64],
    h: f64,
    mut nl: impl FnMut(Stage, &[Complex64]) -> Vec<Complex64>,
) {
    let k1 = nl(Stage::Start, x);
    let mut y: Vec<Complex64> = x.iter().zip(&k1).map(|(a, b)| a + b * (0.5 * h)).collect();
    rotate(&mut y, half);
    let k2 = nl(Stage::Mid, &y);
    let mut ev = x.to_vec();
    rotate(&mut ev, half);
    let y: Vec<Complex64> = ev.iter().zip(&k2).map(|(a, b)| a + b * (0.5 * h)).collect();
    let k3 = nl(Stage::Mid, &y);
    let mut y: Vec<Complex64> = ev.iter().zip(&k3).map(|(a, b)| a + b * h).collect();
    rotate(&mut y, half);
    let k4 = nl(Stage::End, &y);

    for (a, b) in x.iter_mut().zip(&k1) {
        *a += b * (h / 6.0);
    }
    rotate(x, half);
    for ((a, b), c) in x.iter_mut().zip(&k2).zip(&k3) {
        *a += (b + c) * (h / 3.0);
    }
    rotate(x, half);
    for (a, b) in x.iter_mut().zip(&k4) {
        *a += b * (h / 6.0);
    }
}

/// Gauss–Legendre collocation tableau.
struct GaussTableau<const S: usize> {
    c: [f64; S],
    a: [[f64; S]; S],
    b: [f64; S],
}

const GAUSS2: GaussTableau<2> = GaussTableau {
    c: [0.5 - 0.288_675_134_594_812_9, 0.5 + 0.288_675_134_594_812_9],
    a: [
        [0.25, 0.25 - 0.288_675_134_594_812_9],
        [0.25 + 0.288_675_134_594_812_9, 0.25],
    ],
    b: [0.5, 0.5],
};

const GAUSS3: GaussTableau<3> = GaussTableau {
    c: [0.112_701_665_379_258_31, 0.5, 0.887_298_334_620_741_7],
    a: [
        [5.0 / 36.0, -0.035_976_667_524_938_9, 0.009_789_444_015_308_326],
        [0.300_263_194_980_864_6, 2.0 / 9.0, -0.022_485_417_203_086_815],
        [0.267_988_333_762_469_45, 0.480_421_111_969_383_35, 5.0 / 36.0],
    ],
    b: [5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0],
};

const GAUSS_MAX_ITER: usize = 100;

/// One Lawson step on a Gauss–Legendre tableau, with the stage equations solved by
/// fixed-point iteration. Returns `false` if the iteration did not converge.
fn lawson_gauss_step<const S: usize>(
    tab: &GaussTableau<S>,
    x: &mut [Complex64],
    omega: &[f64],
    h: f64,
    mut nl: impl FnMut(&[Complex64]) -> Vec<Complex64>,
) -> bool {
    let rot = |s: f64| -> Vec<Complex64> { omega.iter().map(|w| Complex64::from_polar(1.0, s * w)).collect() };
    let fwd: [Vec<Complex64>; S] = std::array::from_fn(|j| rot(tab.c[j] * h));
    let back: [Vec<Complex64>; S] = std::array::from_fn(|j| rot(-tab.c[j] * h));
    // interaction-picture vector field g_j(w) = E_{−c_j h} F(E_{c_j h} w)
    let mut g = |j: usize, w: &[Complex64]| -> Vec<Complex64> {
        let v: Vec<Complex64> = w.iter().zip(&fwd[j]).map(|(a, b)| a * b).collect();
        nl(&v).iter().zip(&back[j]).map(|(a, b)| a * b).collect()
    };
    let scale = x.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let mut k: [Vec<Complex64>; S] = std::array::from_fn(|j| g(j, x));
    let mut converged = false;
    for _ in 0..GAUSS_MAX_ITER {
        let stage = |i: usize| -> Vec<Complex64> {
            (0..x.len())
                .map(|r| x[r] + (0..S).map(|j| k[j][r] * tab.a[i][j]).sum::<Complex64>() * h)
                .collect()
        };
        let stages: [Vec<Complex64>; S] = std::array::from_fn(stage);
        let next: [Vec<Complex64>; S] = std::array::from_fn(|j| g(j, &stages[j]));
        let change = next
            .iter()
            .zip(&k)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).norm()))
            .fold(0.0, f64::max);
        k = next;
        if !change.is_finite() {
            return false;
        }
        if change * h <= 4.0 * f64::EPSILON * scale {
            converged = true;
            break;
        }
    }
    let full = rot(h);
    for (r, z) in x.iter_mut().enumerate() {
        *z = (*z + (0..S).map(|j| k[j][r] * tab.b[j]).sum::<Complex64>() * h) * full[r];
    }
    converged
}

fn field_nonlinearity(variant: Variant, alpha: f64, v: &[Complex64], scale: f64) -> Vec<Complex64> {
    if scale == 0.0 || variant == Variant::Linear {
        return vec![ZERO; v.len()];
    }
    let k_max = v.len() / 2;
    let f = SpectralField::from_raw(alpha, v.to_vec());
    let mut out = match variant {
        Variant::FullCubic => cubic_product(&f, &f, &f, Some(k_max)).into_coeffs(),
        Variant::TruncatedHam(n) => {
            let p = f.with_cutoff(n);
            cubic_product(&p, &p, &p, Some(n)).with_cutoff(k_max).into_coeffs()
        }
        Variant::WickGauged => {
            let n3 = trilinear_n3(&f, &f, &f, Some(k_max));
            let n0 = trilinear_n0(&f, &f, &f);
            (&n3 - &n0).into_coeffs()
        }
        Variant::Linear => unreachable!(),
    };
    let c = I * scale;
    for z in &mut out {
        *z *= c;
    }
    out
}

/// Evolve `u0` over `[0, T]` with step `dt`.
pub fn evolve(u0: &SpectralField, t_final: f64, dt: f64, variant: Variant) -> Result<Trajectory> {
    evolve_with(u0, TimeGrid::over(0.0, t_final, dt)?, variant, EvolveOptions::default())
}

/// Evolve `u0` (taken as the state at `grid.t0`) across `grid`.
pub fn evolve_with(u0: &SpectralField, grid: TimeGrid, variant: Variant, opts: EvolveOptions) -> Result<Trajectory> {
    if !u0.is_finite() {
        return Err(invalid("initial datum has non-finite coefficients"));
    }
    if let Variant::TruncatedHam(n) = variant {
        if n > u0.n_max() {
            return Err(invalid(format!(
                "truncation n = {n} exceeds the datum cutoff {}",
                u0.n_max()
            )));
        }
    }
    let every = opts.store_every.max(1);
    if !grid.steps.is_multiple_of(every) {
        return Err(invalid("store_every must divide the number of steps"));
    }
    let alpha = u0.alpha();
    let omega: Vec<f64> = u0.frequencies().map(|k| abs_pow(k, alpha)).collect();
    let half = half_step_phases(&omega, grid.dt);
    let mut x = u0.coeffs().to_vec();
    let mut fields = Vec::with_capacity(grid.steps / every + 1);
    fields.push(u0.clone());
    for step in 1..=grid.steps {
        let nl = |v: &[Complex64]| field_nonlinearity(variant, alpha, v, opts.nonlinear_scale);
        match opts.scheme {
            Scheme::LawsonRk4 => lawson_step(&mut x, &half, grid.dt, |_, v| nl(v)),
            Scheme::LawsonGauss | Scheme::LawsonGauss6 => {
                let ok = match opts.scheme {
                    Scheme::LawsonGauss => lawson_gauss_step(&GAUSS2, &mut x, &omega, grid.dt, nl),
                    _ => lawson_gauss_step(&GAUSS3, &mut x, &omega, grid.dt, nl),
                };
                if !ok {
                    let time = grid.time(step);
                    return Err(if x.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
                        Error::NoConvergence { step, time }
                    } else {
                        Error::NonFinite { step, time }
                    });
                }
            }
        }
        if x.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite {
                step,
                time: grid.time(step),
            });
        }
        if step % every == 0 {
            fields.push(SpectralField::from_raw(alpha, x.clone()));
        }
    }
    Ok(Trajectory {
        fields,
        t0: grid.t0,
        dt: grid.dt * every as f64,
        variant,
    })
}

/// Gauge transform `v(t) = u(t)·e^{−itM(u(t))/π}`, taking a cubic solution to the
/// Wick-ordered flow.
pub fn gauge_map(traj: &Trajectory) -> Trajectory {
    gauge_with_sign(traj, -1.0, Variant::WickGauged)
}

/// Inverse of [`gauge_map`].
pub fn gauge_map_inverse(traj: &Trajectory) -> Trajectory {
    gauge_with_sign(traj, 1.0, Variant::FullCubic)
}

fn gauge_with_sign(traj: &Trajectory, sign: f64, variant: Variant) -> Trajectory {
    let fields = traj
        .fields
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let phase = sign * traj.time(i) * mass(u) / PI;
            u.scale(Complex64::from_polar(1.0, phase))
        })
        .collect();
    Trajectory {
        fields,
        t0: traj.t0,
        dt: traj.dt,
        variant,
    }
}

/// Sampled kernel `H_{kk*}(t)` of a random averaging operator.
///
/// Rows are `k = −N..=N`, columns are the shell frequencies `N/2 < |k*| ≤ N`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelTrajectory {
    pub alpha: f64,
    pub n: Dyadic,
    pub l: Dyadic,
    pub t0: f64,
    pub dt: f64,
    pub shell: Vec<i64>,
    pub h: Vec<DMatrix<Complex64>>,
}

impl KernelTrajectory {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    fn row(&self, k: i64) -> usize {
        (k + self.n.cutoff() as i64) as usize
    }

    /// `H_{kk*}` at sample `i`; zero outside the support.
    pub fn entry(&self, i: usize, k: i64, k_star: i64) -> Complex64 {
        let n = self.n.cutoff() as i64;
        match self.shell.iter().position(|&s| s == k_star) {
            Some(c) if k.abs() <= n => self.h[i][(self.row(k), c)],
            _ => ZERO,
        }
    }

    /// `Σ_{k*} H_{kk*}(t_i) φ̂(k*)` for the shell part of `phi`.
    pub fn apply(&self, i: usize, phi: &SpectralField) -> SpectralField {
        let data: Vec<Complex64> = self.shell.iter().map(|&k| phi.get(k)).collect();
        let col = &self.h[i] * nalgebra::DVector::from_vec(data);
        SpectralField::from_raw(phi.alpha(), col.as_slice().to_vec())
    }

    /// `h^{N,L} = H^{N,L} − H^{N,L/2}` when `other` is the kernel at scale `L/2`.
    pub fn difference(&self, other: &Self) -> Result<Self> {
        if self.n != other.n || self.len() != other.len() || !same_time(self.dt, other.dt, self.dt) {
            return Err(Error::GridMismatch("kernels live on different grids".into()));
        }
        Ok(Self {
            alpha: self.alpha,
            n: self.n,
            l: self.l,
            t0: self.t0,
            dt: self.dt,
            shell: self.shell.clone(),
            h: self.h.iter().zip(&other.h).map(|(a, b)| a - b).collect(),
        })
    }

    /// Fraction of `Σ|H_{kk*}|²` at sample `i` carried by `|k − k*| > width`.
    pub fn off_diagonal_fraction(&self, i: usize, width: f64) -> f64 {
        let n = self.n.cutoff() as i64;
        let m = &self.h[i];
        let (mut far, mut total) = (0.0, 0.0);
        for (c, &ks) in self.shell.iter().enumerate() {
            for k in -n..=n {
                let w = m[(self.row(k), c)].norm_sqr();
                total += w;
                if ((k - ks).abs() as f64) > width {
                    far += w;
                }
            }
        }
        if total == 0.0 {
            0.0
        } else {
            far / total
        }
    }
}

/// Background `Π_L v_L` sampled at the stage times of a kernel grid.
struct Background {
    start: Vec<SpectralField>,
    mid: Vec<SpectralField>,
}

fn background_at(vl: &Trajectory, t: f64, l: usize) -> Result<SpectralField> {
    let x = (t - vl.t0) / vl.dt;
    let last = (vl.len() - 1) as f64;
    if x < -1e-9 || x > last + 1e-9 {
        return Err(Error::GridMismatch(format!(
            "t = {t} outside the background grid [{}, {}]",
            vl.t0,
            vl.time(vl.len() - 1)
        )));
    }
    let j = x.round();
    if (x - j).abs() < 1e-9 {
        return Ok(vl.fields[j as usize].with_cutoff(l));
    }
    // Cubic interpolation of the demodulated amplitudes e^{−it|k|^α}v̂(k).
    let width = vl.len().min(4);
    let base = (x.floor() as isize - 1).clamp(0, (vl.len() - width) as isize) as usize;
    let nodes: Vec<usize> = (base..base + width).collect();
    let weights: Vec<f64> = nodes
        .iter()
        .map(|&a| {
            nodes
                .iter()
                .filter(|&&b| b != a)
                .map(|&b| (x - b as f64) / (a as f64 - b as f64))
                .product()
        })
        .collect();
    let alpha = vl.alpha();
    let mut out = SpectralField::zeros(alpha, l);
    for k in -(l as i64)..=(l as i64) {
        let w = abs_pow(k, alpha);
        let mut acc = ZERO;
        for (&node, &wt) in nodes.iter().zip(&weights) {
            let lag = t - vl.time(node);
            acc += vl.fields[node].get(k) * Complex64::from_polar(wt, lag * w);
        }
        out.set(k, acc);
    }
    Ok(out)
}

impl Background {
    fn build(vl: &Trajectory, l: Dyadic, grid: &TimeGrid) -> Result<Self> {
        let l = l.cutoff();
        let start = (0..=grid.steps)
            .map(|i| background_at(vl, grid.time(i), l))
            .collect::<Result<Vec<_>>>()?;
        let mid = (0..grid.steps)
            .map(|i| background_at(vl, grid.time(i) + 0.5 * grid.dt, l))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { start, mid })
    }

    fn at(&self, step: usize, stage: Stage) -> &SpectralField {
        match stage {
            Stage::Start => &self.start[step],
            Stage::Mid => &self.mid[step],
            Stage::End => &self.start[step + 1],
        }
    }
}

// Bandwidth above which the FFT form of the kernel operator is cheaper.
const DIRECT_BAND_LIMIT: usize = 33;

/// `2iΠ_N N₃(φ, a, a)` applied to each column of `phi` (rows `−N..=N`).
fn kernel_operator(phi: &[Complex64], rows: usize, a: &SpectralField) -> Vec<Complex64> {
    let n = (rows / 2) as i64;
    let l = a.n_max() as i64;
    let alpha = a.alpha();
    let mut out = vec![ZERO; phi.len()];
    if a.coeffs().iter().all(|c| *c == ZERO) {
        return out;
    }
    let two_i = 2.0 * I;
    if (4 * l + 1) as usize <= DIRECT_BAND_LIMIT {
        // c(d) = Σ_{k3−k2=d} conj(a(k2)) a(k3)
        let c: Vec<Complex64> = (-2 * l..=2 * l)
            .map(|d| {
                (-l..=l)
                    .filter(|k2| (k2 + d).abs() <= l)
                    .map(|k2| a.get(k2).conj() * a.get(k2 + d))
                    .sum()
            })
            .collect();
        for (col_in, col_out) in phi.chunks(rows).zip(out.chunks_mut(rows)) {
            let s: Complex64 = (-l.min(n)..=l.min(n))
                .map(|j| col_in[(j + n) as usize] * a.get(j).conj())
                .sum();
            for k in -n..=n {
                let mut acc = ZERO;
                for d in -2 * l..=2 * l {
                    let src = k - d;
                    if d != 0 && src.abs() <= n {
                        acc += c[(d + 2 * l) as usize] * col_in[(src + n) as usize];
                    }
                }
                let ak = a.get(k);
                acc += -s * ak + ak.norm_sqr() * col_in[(k + n) as usize];
                col_out[(k + n) as usize] = two_i * acc;
            }
        }
    } else {
        for (col_in, col_out) in phi.chunks(rows).zip(out.chunks_mut(rows)) {
            let f = SpectralField::from_raw(alpha, col_in.to_vec());
            let r = trilinear_n3(&f, a, a, Some(n as usize));
            for (o, v) in col_out.iter_mut().zip(r.coeffs()) {
                *o = two_i * v;
            }
        }
    }
    out
}

/// Integrate the linearized high–low–low flow
/// `ψ_t = i|D|^α ψ + 2iΠ_N N₃(ψ, Π_L v_L, Π_L v_L)` for every column of `data`.
fn propagate_columns(
    n: Dyadic,
    l: Dyadic,
    vl: &Trajectory,
    grid: &TimeGrid,
    data: DMatrix<Complex64>,
) -> Result<Vec<DMatrix<Complex64>>> {
    let rows = 2 * n.cutoff() + 1;
    if data.nrows() != rows {
        return Err(invalid("data rows must span −N..=N"));
    }
    let alpha = vl.alpha();
    let bg = Background::build(vl, l, grid)?;
    let omega: Vec<f64> = (-(n.cutoff() as i64)..=n.cutoff() as i64)
        .map(|k| abs_pow(k, alpha))
        .collect();
    let half = half_step_phases(&omega, grid.dt);
    let cols = data.ncols();
    let mut x = data.as_slice().to_vec();
    let mut out = Vec::with_capacity(grid.len());
    out.push(data);
    for step in 0..grid.steps {
        lawson_step(&mut x, &half, grid.dt, |stage, y| {
            kernel_operator(y, rows, bg.at(step, stage))
        });
        if x.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite {
                step: step + 1,
                time: grid.time(step + 1),
            });
        }
        out.push(DMatrix::from_column_slice(rows, cols, &x));
    }
    Ok(out)
}

fn check_kernel_args(n: Dyadic, l: Dyadic, vl: &Trajectory) -> Result<()> {
    if n.is_half() {
        return Err(invalid("kernel scale N must be at least 1"));
    }
    if l >= n {
        return Err(invalid(format!("background scale L = {l} must lie below N = {n}")));
    }
    if vl.is_empty() {
        return Err(Error::MissingTrajectory("empty background trajectory".into()));
    }
    if vl.n_max() < l.cutoff() {
        return Err(invalid(format!("background cutoff {} is below L = {l}", vl.n_max())));
    }
    Ok(())
}

/// Random averaging kernel `H^{N,L}` on the grid of `vl`.
pub fn solve_kernel(n: Dyadic, l: Dyadic, vl: &Trajectory) -> Result<KernelTrajectory> {
    solve_kernel_on(n, l, vl, &vl.grid())
}

/// Random averaging kernel on a requested grid inside the span of `vl`.
///
/// Stage times that fall between background samples are filled by cubic interpolation
/// of the demodulated background, so any grid aligned with `vl` is accepted.
pub fn solve_kernel_on(n: Dyadic, l: Dyadic, vl: &Trajectory, grid: &TimeGrid) -> Result<KernelTrajectory> {
    check_kernel_args(n, l, vl)?;
    let shell = n.shell();
    let rows = 2 * n.cutoff() + 1;
    let mut data = DMatrix::from_element(rows, shell.len(), ZERO);
    for (c, &k) in shell.iter().enumerate() {
        data[((k + n.cutoff() as i64) as usize, c)] = Complex64::new(1.0, 0.0);
    }
    // columns are independent; split them across threads in blocks
    let blocks: Vec<(usize, usize)> = {
        let threads = rayon::current_num_threads().max(1);
        let per = shell.len().div_ceil(threads).max(1);
        (0..shell.len())
            .step_by(per)
            .map(|s| (s, (s + per).min(shell.len())))
            .collect()
    };
    let parts = blocks
        .par_iter()
        .map(|&(a, b)| propagate_columns(n, l, vl, grid, data.columns(a, b - a).into_owned()))
        .collect::<Result<Vec<_>>>()?;
    let h = (0..grid.len())
        .map(|i| {
            let mut m = DMatrix::from_element(rows, shell.len(), ZERO);
            for (p, &(a, b)) in parts.iter().zip(&blocks) {
                m.columns_mut(a, b - a).copy_from(&p[i]);
            }
            m
        })
        .collect();
    Ok(KernelTrajectory {
        alpha: vl.alpha(),
        n,
        l,
        t0: grid.t0,
        dt: grid.dt,
        shell,
        h,
    })
}

/// `H^{N,L}(P_N φ)` computed directly as a single linearized solution.
pub fn solve_kernel_applied(
    n: Dyadic,
    l: Dyadic,
    vl: &Trajectory,
    grid: &TimeGrid,
    phi: &SpectralField,
) -> Result<Trajectory> {
    check_kernel_args(n, l, vl)?;
    let cutoff = n.cutoff() as i64;
    let rows = 2 * n.cutoff() + 1;
    let mut data = DMatrix::from_element(rows, 1, ZERO);
    for k in n.shell() {
        data[((k + cutoff) as usize, 0)] = phi.get(k);
    }
    let cols = propagate_columns(n, l, vl, grid, data)?;
    let alpha = vl.alpha();
    Ok(Trajectory {
        fields: cols
            .into_iter()
            .map(|m| SpectralField::from_raw(alpha, m.as_slice().to_vec()))
            .collect(),
        t0: grid.t0,
        dt: grid.dt,
        variant: Variant::Linear,
    })
}

/// Restrict a trajectory to `|k| ≤ n` sample-wise.
pub fn project_trajectory(traj: &Trajectory, n: usize) -> Trajectory {
    traj.map(|f| project_to(f, n).with_cutoff(n.min(f.n_max())))
}

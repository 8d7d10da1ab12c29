//! Discrete Sobolev, Fourier–Lebesgue, space-time, X^{s,b} and kernel norms.
//!
//! Space-time norms use the twisted transform
//! `ũ(λ,k) = ∫ e^{−itλ} χ((t−c)/T) e^{−it|k|^α} û(t,k) dt`, so that with `s = b = 0`
//! the X^{s,b} norm equals the `L²_{t,x}` norm of the windowed trajectory.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{KernelTrajectory, Trajectory};
use crate::error::{invalid, Error, Result};
use crate::fft;
use crate::spectral::{abs_pow, japanese, SpectralField};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Zero-padding factor of the modulation transform.
pub const PAD: usize = 4;

/// Share of the weighted modulation spectrum allowed above half the Nyquist frequency.
pub const NYQUIST_TOLERANCE: f64 = 1e-3;

/// Parameters of the space-time norms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub s: f64,
    pub b: f64,
    pub q: f64,
    /// Half-width of the time cutoff `χ((t − center)/window_t)`.
    pub window_t: f64,
    /// Time samples per unit time used by the modulation transform.
    pub oversample: usize,
    /// Center of the time cutoff.
    #[serde(default)]
    pub center: f64,
}

impl NormParams {
    pub fn new(s: f64, b: f64, q: f64, window_t: f64, oversample: usize) -> Result<Self> {
        let p = Self {
            s,
            b,
            q,
            window_t,
            oversample,
            center: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn centered(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.window_t > 0.0) {
            return Err(invalid(format!("window_t = {} must be positive", self.window_t)));
        }
        if self.oversample < 64 {
            return Err(invalid(format!("oversample = {} is below 64", self.oversample)));
        }
        if !(self.q >= 1.0) {
            return Err(invalid(format!("q = {} must be at least 1", self.q)));
        }
        if !self.s.is_finite() || !self.b.is_finite() || !self.center.is_finite() {
            return Err(invalid("non-finite norm parameter"));
        }
        Ok(())
    }
}

fn smooth_step(x: f64) -> f64 {
    let f = |y: f64| if y > 0.0 { (-1.0 / y).exp() } else { 0.0 };
    let (a, b) = (f(x), f(1.0 - x));
    a / (a + b)
}

/// Smooth time cutoff: `1` on `|t| ≤ 1/2`, `0` for `|t| ≥ 1`, `C^∞` in between.
pub fn bump(t: f64) -> f64 {
    let a = t.abs();
    if a <= 0.5 {
        1.0
    } else if a >= 1.0 {
        0.0
    } else {
        smooth_step(2.0 * (1.0 - a))
    }
}

/// `‖⟨k⟩^s û‖_{l²}`.
pub fn sobolev_norm(u: &SpectralField, s: f64) -> f64 {
    u.modes()
        .map(|(k, c)| japanese(k as f64).powf(2.0 * s) * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `‖⟨k⟩^s û‖_{l^q}`, with `q = ∞` allowed.
pub fn fl_norm(u: &SpectralField, s: f64, q: f64) -> f64 {
    let w = u.modes().map(|(k, c)| japanese(k as f64).powf(s) * c.norm());
    lq(w, q)
}

fn lq(values: impl Iterator<Item = f64>, q: f64) -> f64 {
    if q.is_infinite() {
        values.fold(0.0, f64::max)
    } else {
        values.map(|v| v.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

fn index_of(traj: &Trajectory, t: f64) -> Result<usize> {
    let x = (t - traj.t0) / traj.dt;
    let i = x.round();
    if (x - i).abs() > 1e-6 || i < 0.0 || i as usize >= traj.len() {
        return Err(Error::GridMismatch(format!(
            "t = {t} is not a sample of the trajectory grid"
        )));
    }
    Ok(i as usize)
}

/// Composite Simpson over uniformly spaced samples, with a 3/8 panel when the
/// number of intervals is odd.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (values[0] + values[1]),
        3 => h / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        _ => {
            let intervals = n - 1;
            let (even_end, tail) = if intervals.is_multiple_of(2) {
                (n - 1, 0.0)
            } else {
                (
                    n - 4,
                    3.0 * h / 8.0 * (values[n - 4] + 3.0 * values[n - 3] + 3.0 * values[n - 2] + values[n - 1]),
                )
            };
            if even_end == 0 {
                return tail;
            }
            let mut s = values[0] + values[even_end];
            for (i, v) in values.iter().enumerate().take(even_end).skip(1) {
                s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            h / 3.0 * s + tail
        }
    }
}

/// `‖u‖_{L^{p_t}([t_a,t_b]; L^{q_x}(T))`; both exponents may be infinite.
///
/// The spatial norm is taken on a physical grid eight times finer than the cutoff;
/// the time integral uses composite Simpson on the trajectory samples.
pub fn mixed_norm(traj: &Trajectory, p_t: f64, q_x: f64, interval: (f64, f64)) -> Result<f64> {
    if !(p_t >= 1.0) || !(q_x >= 1.0) {
        return Err(invalid("mixed norm exponents must be at least 1"));
    }
    let (a, b) = (index_of(traj, interval.0)?, index_of(traj, interval.1)?);
    if b < a {
        return Err(invalid("empty time interval"));
    }
    let m = fft::grid_len(8 * traj.n_max().max(1));
    let slices: Vec<f64> = traj.fields[a..=b]
        .par_iter()
        .map(|f| {
            let grid = f.to_physical(m);
            if q_x.is_infinite() {
                grid.iter().map(|z| z.norm()).fold(0.0, f64::max)
            } else {
                let mean = grid.iter().map(|z| z.norm().powf(q_x)).sum::<f64>() / m as f64;
                (2.0 * PI * mean).powf(1.0 / q_x)
            }
        })
        .collect();
    if p_t.is_infinite() {
        return Ok(slices.into_iter().fold(0.0, f64::max));
    }
    let powered: Vec<f64> = slices.iter().map(|v| v.powf(p_t)).collect();
    Ok(simpson(&powered, traj.dt).powf(1.0 / p_t))
}

/// Sampling plan of the modulation transform for one trajectory grid.
#[derive(Clone, Debug)]
pub struct ModulationGrid {
    /// Trajectory sample indices inside the window.
    pub indices: Vec<usize>,
    pub times: Vec<f64>,
    pub chi: Vec<f64>,
    /// Time spacing of the retained samples.
    pub tau: f64,
    /// Transform length after zero padding.
    pub len: usize,
    pub dlambda: f64,
}

impl ModulationGrid {
    pub fn new(t0: f64, dt: f64, samples: usize, params: &NormParams) -> Result<Self> {
        params.validate()?;
        let stride = ((1.0 / (params.oversample as f64 * dt)).floor() as usize).max(1);
        let tau = stride as f64 * dt;
        let (lo, hi) = (params.center - params.window_t, params.center + params.window_t);
        let last = t0 + (samples - 1) as f64 * dt;
        let slack = 1e-9 * params.window_t.max(1.0);
        if lo < t0 - slack || hi > last + slack {
            return Err(Error::GridMismatch(format!(
                "cutoff support [{lo}, {hi}] is not covered by the trajectory span [{t0}, {last}]"
            )));
        }
        // samples aligned to the stride, covering the support of the cutoff
        let first = (((lo - t0) / dt / stride as f64).ceil().max(0.0) as usize) * stride;
        let indices: Vec<usize> = (first..samples)
            .step_by(stride)
            .take_while(|&i| t0 + i as f64 * dt <= hi + slack)
            .collect();
        if indices.len() < 8 {
            return Err(invalid("cutoff window holds fewer than 8 time samples"));
        }
        let times: Vec<f64> = indices.iter().map(|&i| t0 + i as f64 * dt).collect();
        let chi = times
            .iter()
            .map(|t| bump((t - params.center) / params.window_t))
            .collect();
        let len = (PAD * indices.len()).next_power_of_two();
        Ok(Self {
            indices,
            times,
            chi,
            tau,
            len,
            dlambda: 2.0 * PI / (len as f64 * tau),
        })
    }

    /// Frequencies `λ_m` in FFT order.
    pub fn lambdas(&self) -> Vec<f64> {
        let n = self.len as i64;
        (0..n)
            .map(|m| {
                let j = if m < n / 2 { m } else { m - n };
                j as f64 * self.dlambda
            })
            .collect()
    }

    pub fn nyquist(&self) -> f64 {
        PI / self.tau
    }

    /// `ũ(λ_m)` for the demodulated samples `a(t_j)` (already restricted to the window).
    pub fn transform(&self, a: &[Complex64]) -> Vec<Complex64> {
        let mut buf = vec![ZERO; self.len];
        for (slot, (v, c)) in buf.iter_mut().zip(a.iter().zip(&self.chi)) {
            *slot = v * (c * self.tau);
        }
        fft::forward_in_place(&mut buf);
        // account for the window not starting at t = 0
        let t_start = self.times[0];
        for (z, l) in buf.iter_mut().zip(self.lambdas()) {
            *z *= Complex64::from_polar(1.0, -l * t_start);
        }
        buf
    }
}

/// Weight `⟨λ⟩^{e}` on the transform grid.
fn weights(lambdas: &[f64], e: f64) -> Vec<f64> {
    lambdas.iter().map(|&l| japanese(l).powf(e)).collect()
}

fn nyquist_check(grid: &ModulationGrid, spectrum: &[f64]) -> Result<()> {
    let half = 0.5 * grid.nyquist();
    let total: f64 = spectrum.iter().sum();
    if total == 0.0 {
        return Ok(());
    }
    let high: f64 = grid
        .lambdas()
        .iter()
        .zip(spectrum)
        .filter(|(l, _)| l.abs() > half)
        .map(|(_, v)| v)
        .sum();
    let fraction = high / total;
    if fraction > NYQUIST_TOLERANCE {
        return Err(Error::OversampleTooSmall {
            nyquist: grid.nyquist(),
            fraction,
        });
    }
    Ok(())
}

/// Demodulated amplitude `e^{−it|k|^α} û(t,k)` on the window samples.
fn demodulated(traj: &Trajectory, grid: &ModulationGrid, k: i64) -> Vec<Complex64> {
    let w = abs_pow(k, traj.alpha());
    grid.indices
        .iter()
        .zip(&grid.times)
        .map(|(&i, &t)| traj.fields[i].get(k) * Complex64::from_polar(1.0, -t * w))
        .collect()
}

/// `‖⟨λ⟩^b ⟨k⟩^s ũ(λ,k)‖_{L²_λ l²_k}` of the windowed trajectory.
pub fn xsb_norm(traj: &Trajectory, params: &NormParams) -> Result<f64> {
    let grid = ModulationGrid::new(traj.t0, traj.dt, traj.len(), params)?;
    let wl = weights(&grid.lambdas(), 2.0 * params.b);
    let n = traj.n_max() as i64;
    let per_mode: Vec<Vec<f64>> = (-n..=n)
        .into_par_iter()
        .map(|k| {
            let wk = japanese(k as f64).powf(2.0 * params.s);
            grid.transform(&demodulated(traj, &grid, k))
                .iter()
                .zip(&wl)
                .map(|(z, w)| wk * w * z.norm_sqr())
                .collect()
        })
        .collect();
    let spectrum: Vec<f64> = (0..grid.len).map(|m| per_mode.iter().map(|v| v[m]).sum()).collect();
    nyquist_check(&grid, &spectrum)?;
    Ok((spectrum.iter().sum::<f64>() * grid.dlambda).sqrt())
}

/// Kernel norms `Y^b`, `Z^b` and `S^{b,q}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorNorms {
    pub y: f64,
    pub z: f64,
    pub s: f64,
}

/// `Y^b` (operator norm `l²_{k*} → L²_λ l²_k`), `Z^b` (Hilbert–Schmidt) and
/// `S^{b,q}` (`l^∞_k L^q_λ l²_{k*}` with weight `⟨λ⟩^{2b/q'}`) of a sampled kernel.
pub fn operator_norms(kernel: &KernelTrajectory, params: &NormParams) -> Result<OperatorNorms> {
    let grid = ModulationGrid::new(kernel.t0, kernel.dt, kernel.len(), params)?;
    let lambdas = grid.lambdas();
    let b = params.b;
    let wy = weights(&lambdas, 2.0 * b);
    let q = params.q;
    let q_conj = if q == 1.0 { f64::INFINITY } else { q / (q - 1.0) };
    let ws = weights(&lambdas, if q_conj.is_infinite() { 0.0 } else { 2.0 * b / q_conj });
    let n = kernel.n.cutoff() as i64;
    let cols = kernel.shell.len();
    let alpha = kernel.alpha;

    struct RowStats {
        gram: DMatrix<Complex64>,
        spectrum: Vec<f64>,
        s_row: f64,
    }

    let rows: Vec<RowStats> = (-n..=n)
        .into_par_iter()
        .map(|k| {
            let r = (k + n) as usize;
            let w = abs_pow(k, alpha);
            let transformed: Vec<Vec<Complex64>> = (0..cols)
                .map(|c| {
                    let a: Vec<Complex64> = grid
                        .indices
                        .iter()
                        .zip(&grid.times)
                        .map(|(&i, &t)| kernel.h[i][(r, c)] * Complex64::from_polar(1.0, -t * w))
                        .collect();
                    grid.transform(&a)
                })
                .collect();
            let mut gram = DMatrix::from_element(cols, cols, ZERO);
            let mut spectrum = vec![0.0; grid.len];
            let mut s_vals = Vec::with_capacity(grid.len);
            for m in 0..grid.len {
                let col_sq: f64 = transformed.iter().map(|t| t[m].norm_sqr()).sum();
                spectrum[m] = wy[m] * col_sq;
                s_vals.push(ws[m] * col_sq.sqrt());
                if col_sq == 0.0 {
                    continue;
                }
                for a in 0..cols {
                    let za = transformed[a][m].conj() * wy[m];
                    for c in 0..cols {
                        gram[(a, c)] += za * transformed[c][m];
                    }
                }
            }
            let s_row = if q.is_infinite() {
                s_vals.iter().cloned().fold(0.0, f64::max)
            } else {
                (s_vals.iter().map(|v| v.powf(q)).sum::<f64>() * grid.dlambda).powf(1.0 / q)
            };
            RowStats { gram, spectrum, s_row }
        })
        .collect();

    let mut gram = DMatrix::from_element(cols, cols, ZERO);
    let mut spectrum = vec![0.0; grid.len];
    let mut s_norm: f64 = 0.0;
    for row in &rows {
        gram += &row.gram;
        for (a, b) in spectrum.iter_mut().zip(&row.spectrum) {
            *a += b;
        }
        s_norm = s_norm.max(row.s_row);
    }
    nyquist_check(&grid, &spectrum)?;
    let z = (spectrum.iter().sum::<f64>() * grid.dlambda).sqrt();
    let y = if cols == 0 {
        0.0
    } else {
        let eig = (gram * Complex64::new(grid.dlambda, 0.0)).symmetric_eigenvalues();
        eig.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt()
    };
    Ok(OperatorNorms { y, z, s: s_norm })
}

/// One line of a norm table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub norm_name: String,
    pub s: f64,
    pub b: f64,
    pub q: f64,
    pub n: usize,
    pub l: String,
    pub value: f64,
}

/// CSV with columns `norm_name,s,b,q,N,L,value`.
pub fn write_norm_csv<W: Write>(mut w: W, rows: &[NormRecord]) -> Result<()> {
    writeln!(w, "norm_name,s,b,q,N,L,value")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{},{}", r.norm_name, r.s, r.b, r.q, r.n, r.l, r.value)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve, linear_propagate, solve_kernel, Variant};
    use crate::random::{sample_gaussian, SeedSpec};
    use crate::spectral::Dyadic;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn sobolev_and_fl_examples() {
        let e0 = SpectralField::mode(1.5, 3, 0, c(1.0, 0.0));
        let e1 = SpectralField::mode(1.5, 3, 1, c(1.0, 0.0));
        let e2 = SpectralField::mode(1.5, 3, 2, c(3.0, 0.0));
        assert!((sobolev_norm(&e0, 0.7) - 1.0).abs() < 1e-15);
        assert!((sobolev_norm(&e1, 1.0) - 2f64.sqrt()).abs() < 1e-15);
        assert!((sobolev_norm(&e2, 0.0) - 3.0).abs() < 1e-15);
        assert!((fl_norm(&e2, 0.5, f64::INFINITY) - 3.0 * 5f64.powf(0.25)).abs() < 1e-14);
        assert!((fl_norm(&(&e0 + &e1), 0.0, 1.0) - 2.0).abs() < 1e-15);
        assert_eq!(fl_norm(&SpectralField::zeros(1.5, 3), 1.0, 2.0), 0.0);
    }

    #[test]
    fn bump_shape() {
        assert_eq!(bump(0.0), 1.0);
        assert_eq!(bump(0.5), 1.0);
        assert_eq!(bump(-0.5), 1.0);
        assert_eq!(bump(1.0), 0.0);
        assert!(bump(0.75) > 0.0 && bump(0.75) < 1.0);
        assert!((bump(0.75) - 0.5).abs() < 1e-12);
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = bump(0.5 + 0.005 * i as f64);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let f = |x: f64| 1.0 + x - 2.0 * x * x + 0.5 * x * x * x;
        let exact = |x: f64| x + x * x / 2.0 - 2.0 * x * x * x / 3.0 + x.powi(4) / 8.0;
        for n in [3usize, 4, 5, 8, 11] {
            let h = 2.0 / (n - 1) as f64;
            let v: Vec<f64> = (0..n).map(|i| f(i as f64 * h)).collect();
            assert!((simpson(&v, h) - exact(2.0)).abs() < 1e-12, "n = {n}");
        }
    }

    fn constant_trajectory(f: SpectralField, t: f64, dt: f64) -> Trajectory {
        let steps = (t / dt).round() as usize;
        Trajectory {
            fields: vec![f; steps + 1],
            t0: 0.0,
            dt,
            variant: Variant::Linear,
        }
    }

    fn linear_trajectory(u0: &SpectralField, t0: f64, t: f64, dt: f64) -> Trajectory {
        let steps = (t / dt).round() as usize;
        Trajectory {
            fields: (0..=steps).map(|i| linear_propagate(u0, t0 + i as f64 * dt)).collect(),
            t0,
            dt,
            variant: Variant::Linear,
        }
    }

    #[test]
    fn mixed_norm_examples() {
        // u ≡ 1 has û(0) = 1
        let one = SpectralField::mode(1.5, 4, 0, c(1.0, 0.0));
        let traj = constant_trajectory(one, 1.0, 0.01);
        assert!((mixed_norm(&traj, 4.0, f64::INFINITY, (0.0, 1.0)).unwrap() - 1.0).abs() < 1e-12);
        let e1 = SpectralField::mode(1.5, 4, 1, c(1.0, 0.0));
        let lin = linear_trajectory(&e1, 0.0, 1.0, 0.01);
        assert!((mixed_norm(&lin, 4.0, f64::INFINITY, (0.0, 1.0)).unwrap() - 1.0).abs() < 1e-12);
        let u0 = sample_gaussian(6, 1.5, SeedSpec::new(1, 0));
        let lin = linear_trajectory(&u0, 0.0, 1.0, 0.01);
        let expect = (2.0 * PI).sqrt() * u0.l2();
        assert!((mixed_norm(&lin, 2.0, 2.0, (0.0, 1.0)).unwrap() - expect).abs() < 1e-12);
        assert!(mixed_norm(&lin, 2.0, 2.0, (0.0, 1.005)).is_err());
    }

    /// `∫ ⟨λ⟩^{2b} |χ̂(λ − shift)|² dλ` with `χ̂` and the λ-integral both by direct quadrature.
    fn chi_hat_weighted(window: f64, b: f64, shift: f64) -> f64 {
        let nt = 4000;
        let ht = 2.0 * window / nt as f64;
        let ts: Vec<f64> = (0..=nt).map(|i| -window + i as f64 * ht).collect();
        let chi_hat = |l: f64| -> Complex64 {
            let vals: Vec<Complex64> = ts
                .iter()
                .map(|&t| Complex64::from_polar(bump(t / window), -l * t))
                .collect();
            let re: Vec<f64> = vals.iter().map(|z| z.re).collect();
            let im: Vec<f64> = vals.iter().map(|z| z.im).collect();
            c(simpson(&re, ht), simpson(&im, ht))
        };
        let (lmax, nl) = (400.0 / window, 40_000);
        let hl = 2.0 * lmax / nl as f64;
        let vals: Vec<f64> = (0..=nl)
            .map(|i| {
                let l = -lmax + i as f64 * hl;
                japanese(l).powf(2.0 * b) * chi_hat(l - shift).norm_sqr()
            })
            .collect();
        simpson(&vals, hl)
    }

    #[test]
    fn xsb_of_windowed_linear_flow() {
        let m = 3;
        let (s, b) = (0.4, 0.45);
        let e = SpectralField::mode(1.5, 4, m, c(1.0, 0.0));
        let lin = linear_trajectory(&e, -1.0, 2.0, 1e-3);
        let params = NormParams::new(s, b, 2.0, 1.0, 256).unwrap();
        let got = xsb_norm(&lin, &params).unwrap();
        let expect = japanese(m as f64).powf(s) * chi_hat_weighted(1.0, b, 0.0).sqrt();
        assert!(((got - expect) / expect).abs() < 1e-6, "{got} vs {expect}");

        // an extra unit frequency shifts χ̂
        let alpha = 1.5;
        let shifted = Trajectory {
            fields: lin
                .times()
                .iter()
                .map(|&t| {
                    SpectralField::mode(
                        alpha,
                        4,
                        m,
                        Complex64::from_polar(1.0, ((m as f64).powf(alpha) + 1.0) * t),
                    )
                })
                .collect(),
            ..lin.clone()
        };
        let got = xsb_norm(&shifted, &params).unwrap();
        let expect = japanese(m as f64).powf(s) * chi_hat_weighted(1.0, b, 1.0).sqrt();
        assert!(((got - expect) / expect).abs() < 1e-6, "{got} vs {expect}");

        let zero = constant_trajectory(SpectralField::zeros(1.5, 4), 2.0, 1e-3);
        let zero = Trajectory { t0: -1.0, ..zero };
        assert_eq!(xsb_norm(&zero, &params).unwrap(), 0.0);
    }

    fn nonlinear_window(seed: u64) -> Trajectory {
        let u0 = sample_gaussian(8, 1.5, SeedSpec::new(seed, 0));
        let traj = evolve(&u0, 2.0, 1e-3, Variant::WickGauged).unwrap();
        Trajectory { t0: -1.0, ..traj }
    }

    #[test]
    fn xsb_plancherel() {
        let traj = nonlinear_window(2);
        let params = NormParams::new(0.0, 0.0, 2.0, 1.0, 1000).unwrap();
        let got = xsb_norm(&traj, &params).unwrap();
        let windowed = Trajectory {
            fields: traj
                .fields
                .iter()
                .enumerate()
                .map(|(i, f)| f.scale(c(bump(traj.time(i)), 0.0)))
                .collect(),
            ..traj.clone()
        };
        let expect = mixed_norm(&windowed, 2.0, 2.0, (-1.0, 1.0)).unwrap();
        assert!(((got - expect) / expect).abs() < 1e-6, "{got} vs {expect}");
    }

    #[test]
    fn xsb_converges_in_oversampling() {
        let traj = nonlinear_window(3);
        for b in [0.3, 0.6] {
            let p1 = NormParams::new(0.2, b, 2.0, 1.0, 250).unwrap();
            let p2 = NormParams::new(0.2, b, 2.0, 1.0, 500).unwrap();
            let (n1, n2) = (xsb_norm(&traj, &p1).unwrap(), xsb_norm(&traj, &p2).unwrap());
            assert!(((n1 - n2) / n2).abs() < 1e-4, "b = {b}: {n1} vs {n2}");
        }
    }

    #[test]
    fn xsb_rejects_coarse_sampling_and_short_trajectories() {
        let e = SpectralField::mode(1.5, 4, 1, c(1.0, 0.0));
        // at oversample 64 the Nyquist frequency is π/0.015 ≈ 209; put the signal at 150
        let fast = Trajectory {
            fields: (0..=2000)
                .map(|i| {
                    let t = -1.0 + i as f64 * 1e-3;
                    e.scale(Complex64::from_polar(1.0, 151.0 * t))
                })
                .collect(),
            t0: -1.0,
            dt: 1e-3,
            variant: Variant::Linear,
        };
        let coarse = NormParams::new(0.0, 0.5, 2.0, 1.0, 64).unwrap();
        assert!(matches!(
            xsb_norm(&fast, &coarse),
            Err(Error::OversampleTooSmall { .. })
        ));
        let fine = NormParams::new(0.0, 0.5, 2.0, 1.0, 1000).unwrap();
        assert!(xsb_norm(&fast, &fine).is_ok());
        let short = linear_trajectory(&e, 0.0, 1.0, 1e-3);
        assert!(matches!(xsb_norm(&short, &fine), Err(Error::GridMismatch(_))));
        assert!(NormParams::new(0.0, 0.5, 2.0, 1.0, 32).is_err());
        assert!(NormParams::new(0.0, 0.5, 2.0, 0.0, 64).is_err());
    }

    #[test]
    fn time_localization_gains_a_power() {
        let (b, b_tilde) = (0.45, 0.3);
        for seed in [4u64, 5] {
            let traj = nonlinear_window(seed);
            let base = xsb_norm(&traj, &NormParams::new(0.0, b, 2.0, 1.0, 1000).unwrap()).unwrap();
            let windows = [0.25, 0.125, 0.0625];
            let ratios: Vec<f64> = windows
                .iter()
                .map(|&w| xsb_norm(&traj, &NormParams::new(0.0, b_tilde, 2.0, w, 1000).unwrap()).unwrap() / base)
                .collect();
            assert!(ratios.iter().all(|r| r.is_finite() && *r < 10.0));
            let slope = (ratios[0] / ratios[2]).ln() / (windows[0] / windows[2]).ln();
            assert!(slope >= (b - b_tilde) - 0.1, "slope {slope}");
        }
    }

    fn free_kernel(n: usize, t: f64, dt: f64) -> KernelTrajectory {
        let vl = Trajectory {
            fields: vec![SpectralField::zeros(1.5, 1); (t / dt).round() as usize + 1],
            t0: -t / 2.0,
            dt,
            variant: Variant::Linear,
        };
        solve_kernel(Dyadic::new(n).unwrap(), Dyadic::ONE, &vl).unwrap()
    }

    #[test]
    fn operator_norms_of_free_kernel() {
        let ker = free_kernel(8, 2.0, 1e-3);
        let (b, q) = (0.4, 4.0);
        let params = NormParams::new(0.0, b, q, 1.0, 256).unwrap();
        let norms = operator_norms(&ker, &params).unwrap();
        let base = chi_hat_weighted(1.0, b, 0.0).sqrt();
        assert!(((norms.y - base) / base).abs() < 1e-6, "{} vs {base}", norms.y);
        let z = (ker.shell.len() as f64).sqrt() * base;
        assert!(((norms.z - z) / z).abs() < 1e-6);
        // S^{b,q}: ‖⟨λ⟩^{2b/q'} χ̂‖_{L^q} by direct quadrature
        let q_conj = q / (q - 1.0);
        let grid = ModulationGrid::new(ker.t0, ker.dt, ker.len(), &params).unwrap();
        let ones = vec![c(1.0, 0.0); grid.indices.len()];
        let chi_hat = grid.transform(&ones);
        let s: f64 = grid
            .lambdas()
            .iter()
            .zip(&chi_hat)
            .map(|(l, z)| (japanese(*l).powf(2.0 * b / q_conj) * z.norm()).powf(q))
            .sum::<f64>()
            * grid.dlambda;
        assert!(((norms.s - s.powf(1.0 / q)) / norms.s).abs() < 1e-10);
    }

    #[test]
    fn zero_kernel_has_zero_norms() {
        let mut ker = free_kernel(4, 2.0, 1e-3);
        for m in &mut ker.h {
            m.fill(ZERO);
        }
        let params = NormParams::new(0.0, 0.4, 2.0, 1.0, 128).unwrap();
        assert_eq!(
            operator_norms(&ker, &params).unwrap(),
            OperatorNorms { y: 0.0, z: 0.0, s: 0.0 }
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn operator_norm_below_hilbert_schmidt(seed in any::<u64>(), b in 0.0f64..0.6) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand::rngs::SmallRng::seed_from_u64(seed);
            let mut ker = free_kernel(8, 2.0, 1.0 / 128.0);
            let r = DMatrix::from_fn(17, ker.shell.len(), |_, _| {
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let rate: f64 = rng.random_range(-3.0..3.0);
            for i in 0..ker.len() {
                let t = ker.time(i);
                ker.h[i] += &r * Complex64::from_polar(0.3, rate * t);
            }
            let params = NormParams::new(0.0, b, 2.0, 1.0, 64).unwrap();
            let n = operator_norms(&ker, &params).unwrap();
            prop_assert!(n.y <= n.z * (1.0 + 1e-12));
            prop_assert!(n.y > 0.0);
        }
    }

    #[test]
    fn norm_csv_layout() {
        let rows = vec![NormRecord {
            norm_name: "xsb".into(),
            s: 0.1,
            b: 0.45,
            q: 2.0,
            n: 16,
            l: "1/2".into(),
            value: 1.25,
        }];
        let mut buf = Vec::new();
        write_norm_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "norm_name,s,b,q,N,L,value\nxsb,0.1,0.45,2,16,1/2,1.25\n"
        );
    }
}

//! Least-squares fits and two-sample tests used by the experiments.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Ordinary least-squares line `y ≈ slope·x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() {
        return Err(invalid("fit inputs differ in length"));
    }
    let n = xs.len();
    if n < 2 {
        return Err(invalid("a line fit needs at least two points"));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("fit abscissae are all equal"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let slope_stderr = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        r2,
    })
}

/// Fit of `ln y` against `ln x`.
pub fn log_log_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(invalid("log-log fit needs positive data"));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Smallest sample size accepted by [`ks_two_sample`].
pub const KS_MIN_SAMPLES: usize = 500;

/// Asymptotic coefficient `c(0.01)` of the two-sample Kolmogorov–Smirnov test.
pub const KS_COEFF_1PCT: f64 = 1.628;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub critical_1pct: f64,
    pub n: usize,
    pub m: usize,
}

impl KsResult {
    pub fn passes(&self) -> bool {
        self.statistic < self.critical_1pct
    }
}

/// Two-sample Kolmogorov–Smirnov statistic with its asymptotic 1% critical value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.len() < KS_MIN_SAMPLES || b.len() < KS_MIN_SAMPLES {
        return Err(invalid(format!(
            "two-sample test needs at least {KS_MIN_SAMPLES} samples per side (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(invalid("NaN in two-sample test input"));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let (nf, mf) = (n as f64, m as f64);
    Ok(KsResult {
        statistic: d,
        critical_1pct: KS_COEFF_1PCT * ((nf + mf) / (nf * mf)).sqrt(),
        n,
        m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!((f.intercept - 3.0).abs() < 1e-14);
        assert!(f.slope_stderr < 1e-14);
        assert!((f.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn power_law_slope() {
        let xs: Vec<f64> = (1..20).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 7.0 * x.powf(-1.25)).collect();
        assert!((log_log_fit(&xs, &ys).unwrap().slope + 1.25).abs() < 1e-12);
    }

    #[test]
    fn ks_statistic_by_brute_force() {
        let a: Vec<f64> = (0..600).map(|i| ((i * 37) % 600) as f64 / 600.0).collect();
        let b: Vec<f64> = (0..700).map(|i| (((i * 53) % 700) as f64 / 700.0).powf(1.3)).collect();
        let r = ks_two_sample(&a, &b).unwrap();
        let ecdf = |s: &[f64], t: f64| s.iter().filter(|v| **v <= t).count() as f64 / s.len() as f64;
        let brute = a
            .iter()
            .chain(&b)
            .map(|&t| (ecdf(&a, t) - ecdf(&b, t)).abs())
            .fold(0.0, f64::max);
        assert!((r.statistic - brute).abs() < 1e-15);
        assert!((r.critical_1pct - 1.628 * (1300.0f64 / 420000.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn ks_identical_samples() {
        let a: Vec<f64> = (0..500).map(|i| i as f64).collect();
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.passes());
    }

    #[test]
    fn ks_rejects_small_samples() {
        assert!(ks_two_sample(&[0.0; 10], &[0.0; 600]).is_err());
    }
}

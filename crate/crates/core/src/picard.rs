//! Picard iterates of the cubic equation and their second moments.
//!
//! `z_1 = S_α(t)φ` and, for `j ≥ 1`,
//! `(i∂_t + |D|^α) z_{2j+1} = −Σ_{j1+j2+j3=j−1} z_{2j1+1} conj(z_{2j2+1}) z_{2j3+1}`
//! with zero data. In the interaction picture `z = S_α(t)a` this reads
//! `a(t) = i∫_0^t S_α(−s) G(s) ds` with `G = Σ z_{2j1+1} conj(z_{2j2+1}) z_{2j3+1}`, integrated by cumulative Simpson on the time grid.

use std::io::Write;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{linear_propagate, TimeGrid, Trajectory, Variant};
use crate::error::{invalid, Error, Result};
use crate::random::{sample_gaussian, SeedSpec};
use crate::spectral::{abs_pow, cubic_product, weight_bracket, SpectralField};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Exact values `κ_0, …, κ_J` of the recurrence
/// `κ_j = (1/j) Σ_{j1+j2+j3=j−1} κ_{j1}κ_{j2}κ_{j3}`, `κ_0 = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct KappaSequence {
    pub values: Vec<BigRational>,
}

impl KappaSequence {
    pub fn new(j_max: usize) -> Self {
        let mut values: Vec<BigRational> = vec![BigRational::one()];
        for j in 1..=j_max {
            let mut acc = BigRational::zero();
            for j1 in 0..j {
                for j2 in 0..j - j1 {
                    let j3 = j - 1 - j1 - j2;
                    acc += &values[j1] * &values[j2] * &values[j3];
                }
            }
            values.push(acc / BigRational::from_integer(BigInt::from(j)));
        }
        Self { values }
    }

    pub fn get(&self, j: usize) -> &BigRational {
        &self.values[j]
    }

    /// `Σ_{j ≤ J} κ_j z^j` in floating point.
    pub fn partial_sum(&self, j_max: usize, z: f64) -> f64 {
        self.values[..=j_max]
            .iter()
            .enumerate()
            .map(|(j, k)| to_f64(k) * z.powi(j as i32))
            .sum()
    }

    /// Bound `2κ_{J+1}z^{J+1}` on the tail of the generating series for `0 < z ≤ 1/4`.
    pub fn tail_bound(&self, j_max: usize, z: f64) -> f64 {
        2.0 * to_f64(&self.values[j_max + 1]) * z.powi(j_max as i32 + 1)
    }
}

/// `κ_j` computed by the recurrence.
pub fn kappa(j: usize) -> BigRational {
    KappaSequence::new(j).values.pop().expect("non-empty sequence")
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Iterates `z_1, z_3, …, z_{2J+1}` on one time grid. `z_{2j+1}` is stored at cutoff
/// `(2j+1)·n`, which holds every frequency it can reach.
#[derive(Clone, Debug)]
pub struct PicardChain {
    pub iterates: Vec<Trajectory>,
}

impl PicardChain {
    /// Compute all iterates up to `z_{2J+1}` for data `phi` over `[0, T]`.
    pub fn compute(j_max: usize, phi: &SpectralField, t_final: f64, dt: f64) -> Result<Self> {
        let grid = TimeGrid::over(0.0, t_final, dt)?;
        let n = phi.n_max();
        let alpha = phi.alpha();
        let mut iterates: Vec<Trajectory> = Vec::with_capacity(j_max + 1);
        let z1 = Trajectory {
            fields: (0..grid.len()).map(|i| linear_propagate(phi, grid.time(i))).collect(),
            t0: 0.0,
            dt,
            variant: Variant::Linear,
        };
        iterates.push(z1);
        for j in 1..=j_max {
            let cutoff = (2 * j + 1) * n;
            // G(t_i) = Σ z_{2j1+1} conj(z_{2j2+1}) z_{2j3+1}
            let forcing: Vec<SpectralField> = (0..grid.len())
                .map(|i| {
                    let mut f = SpectralField::zeros(alpha, cutoff);
                    for j1 in 0..j {
                        for j2 in 0..j - j1 {
                            let j3 = j - 1 - j1 - j2;
                            let p = cubic_product(
                                &iterates[j1].fields[i],
                                &iterates[j2].fields[i],
                                &iterates[j3].fields[i],
                                Some(cutoff),
                            );
                            f = &f + &p;
                        }
                    }
                    f
                })
                .collect();
            iterates.push(duhamel(&forcing, &grid, alpha));
        }
        Ok(Self { iterates })
    }

    pub fn j_max(&self) -> usize {
        self.iterates.len() - 1
    }

    /// Partial sum `Z_{2J+1} = Σ_{j ≤ J} z_{2j+1}` at sample `i`, at the largest cutoff.
    pub fn partial_sum(&self, j_max: usize, i: usize) -> SpectralField {
        let cutoff = self.iterates[j_max].n_max();
        self.iterates[..=j_max]
            .iter()
            .fold(SpectralField::zeros(self.iterates[0].alpha(), cutoff), |acc, z| {
                &acc + &z.fields[i].with_cutoff(cutoff)
            })
    }

    /// `‖(i∂_t + |D|^α)Z + |Z|²Z‖_{l²}` for `Z = Z_{2J+1}` at sample `i`, with the time
    /// derivative taken by the five-point central difference.
    pub fn residual(&self, j_max: usize, i: usize) -> Result<f64> {
        let len = self.iterates[0].len();
        if i < 2 || i + 2 >= len {
            return Err(invalid("residual needs two samples on each side"));
        }
        let h = self.iterates[0].dt;
        let z: Vec<SpectralField> = (i - 2..=i + 2).map(|m| self.partial_sum(j_max, m)).collect();
        let alpha = z[2].alpha();
        let cutoff = z[2].n_max();
        let cube = cubic_product(&z[2], &z[2], &z[2], Some(3 * cutoff));
        let mut sq = 0.0;
        for k in -(3 * cutoff as i64)..=(3 * cutoff as i64) {
            let dz = (z[0].get(k) - 8.0 * z[1].get(k) + 8.0 * z[3].get(k) - z[4].get(k)) / (12.0 * h);
            let r = I * dz + abs_pow(k, alpha) * z[2].get(k) + cube.get(k);
            sq += r.norm_sqr();
        }
        Ok(sq.sqrt())
    }
}

/// `a(t_i) = i∫_0^{t_i} e^{−is|k|^α} Ĝ(s,k) ds`, returned as `z = S_α(t)a`.
pub(crate) fn duhamel(forcing: &[SpectralField], grid: &TimeGrid, alpha: f64) -> Trajectory {
    let len = forcing.len();
    let cutoff = forcing[0].n_max();
    let h = grid.dt;
    let ks: Vec<i64> = forcing[0].frequencies().collect();
    let omega: Vec<f64> = ks.iter().map(|&k| abs_pow(k, alpha)).collect();
    // interaction-picture integrand g_i(k)
    let g: Vec<Vec<Complex64>> = forcing
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let t = grid.time(i);
            f.coeffs()
                .iter()
                .zip(&omega)
                .map(|(c, w)| c * Complex64::from_polar(1.0, -t * w))
                .collect()
        })
        .collect();
    let width = ks.len();
    let mut integral = vec![vec![ZERO; width]; len];
    for i in 1..len {
        let mut row = vec![ZERO; width];
        if i % 2 == 0 {
            // Simpson panel on [t_{i−2}, t_i]
            for r in 0..width {
                row[r] = integral[i - 2][r] + (g[i - 2][r] + 4.0 * g[i - 1][r] + g[i][r]) * (h / 3.0);
            }
        } else if i + 1 < len {
            for r in 0..width {
                row[r] = integral[i - 1][r] + (5.0 * g[i - 1][r] + 8.0 * g[i][r] - g[i + 1][r]) * (h / 12.0);
            }
        } else if i >= 2 {
            for r in 0..width {
                row[r] = integral[i - 1][r] + (-g[i - 2][r] + 8.0 * g[i - 1][r] + 5.0 * g[i][r]) * (h / 12.0);
            }
        } else {
            for r in 0..width {
                row[r] = (g[0][r] + g[1][r]) * (0.5 * h);
            }
        }
        integral[i] = row;
    }
    let fields = integral
        .into_iter()
        .enumerate()
        .map(|(i, a)| {
            let t = grid.time(i);
            let coeffs = a
                .iter()
                .zip(&omega)
                .map(|(c, w)| I * c * Complex64::from_polar(1.0, t * w))
                .collect();
            SpectralField::from_coeffs(alpha, coeffs).expect("finite Duhamel integral")
        })
        .collect::<Vec<_>>();
    debug_assert!(fields.iter().all(|f| f.n_max() == cutoff));
    Trajectory {
        fields,
        t0: grid.t0,
        dt: grid.dt,
        variant: Variant::Linear,
    }
}

/// `z_{2j+1}` on `[0, T]`.
pub fn picard_iterate(j: usize, phi: &SpectralField, t_final: f64, dt: f64) -> Result<Trajectory> {
    let mut chain = PicardChain::compute(j, phi, t_final, dt)?;
    Ok(chain.iterates.pop().expect("non-empty chain"))
}

/// `t^{2j}(2j+1)!κ_j²`.
pub fn moment_bound(j: usize, t: f64) -> f64 {
    let k = to_f64(&kappa(j));
    let fact: f64 = (1..=2 * j + 1).map(|m| m as f64).product();
    t.powi(2 * j as i32) * fact * k * k
}

/// `Σ_{|k| ≤ n}(1 + |k|^α)^{−1}`, the exact value of `E|z_1(t,x)|²`.
pub fn linear_second_moment(n: usize, alpha: f64) -> f64 {
    let n = n as i64;
    (-n..=n).map(|k| weight_bracket(k, alpha).powi(-2)).sum()
}

/// One line of the moment table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRecord {
    pub j: usize,
    pub n: usize,
    pub alpha: f64,
    pub t: f64,
    pub n_samples: usize,
    pub empirical_mean: f64,
    pub std_error: f64,
    pub bound_value: f64,
    pub ratio: f64,
}

/// Monte Carlo estimate of `E|z_{2j+1}(t,0)|²` over Gaussian data at each of `times`,
/// with its ratio to `t^{2j}(2j+1)!κ_j²`.
pub fn moment_bound_check(
    j: usize,
    n: usize,
    alpha: f64,
    times: &[f64],
    dt: f64,
    n_samples: usize,
    master_seed: u64,
) -> Result<Vec<MomentRecord>> {
    if times.is_empty() || n_samples < 2 {
        return Err(invalid("need at least one time and two samples"));
    }
    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let grid = TimeGrid::over(0.0, t_max, dt)?;
    let indices: Vec<usize> = times
        .iter()
        .map(|&t| {
            let x = t / dt;
            if (x - x.round()).abs() > 1e-9 * x.max(1.0) {
                Err(Error::GridMismatch(format!("t = {t} is not on the dt = {dt} grid")))
            } else {
                Ok(x.round() as usize)
            }
        })
        .collect::<Result<_>>()?;
    let values: Vec<Vec<f64>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|s| {
            let phi = sample_gaussian(n, alpha, SeedSpec::new(master_seed, s));
            let chain = PicardChain::compute(j, &phi, grid.t_final(), dt)?;
            let z = &chain.iterates[j];
            Ok(indices
                .iter()
                .map(|&i| z.fields[i].coeffs().iter().sum::<Complex64>().norm_sqr())
                .collect())
        })
        .collect::<Result<_>>()?;
    let m = n_samples as f64;
    Ok(times
        .iter()
        .enumerate()
        .map(|(c, &t)| {
            let mean = values.iter().map(|v| v[c]).sum::<f64>() / m;
            let var = values.iter().map(|v| (v[c] - mean).powi(2)).sum::<f64>() / (m - 1.0);
            let bound = moment_bound(j, t);
            MomentRecord {
                j,
                n,
                alpha,
                t,
                n_samples,
                empirical_mean: mean,
                std_error: (var / m).sqrt(),
                bound_value: bound,
                ratio: mean / bound,
            }
        })
        .collect())
}

/// CSV with columns `j,n,alpha,t,n_samples,empirical_mean,bound_value,ratio`.
pub fn write_moment_csv<W: Write>(mut w: W, rows: &[MomentRecord]) -> Result<()> {
    writeln!(w, "j,n,alpha,t,n_samples,empirical_mean,bound_value,ratio")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.j, r.n, r.alpha, r.t, r.n_samples, r.empirical_mean, r.bound_value, r.ratio
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Signed;
    use proptest::prelude::*;

    fn closed_form(j: usize) -> BigRational {
        let double_fact: BigInt = (1..=j).map(|m| BigInt::from(2 * m - 1)).product();
        let fact: BigInt = (1..=j).map(BigInt::from).product();
        BigRational::new(double_fact, fact)
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(kappa(0), BigRational::one());
        assert_eq!(kappa(1), BigRational::one());
        assert_eq!(kappa(2), BigRational::new(3.into(), 2.into()));
        assert_eq!(kappa(5), BigRational::new(63.into(), 8.into()));
    }

    #[test]
    fn kappa_matches_closed_form() {
        let seq = KappaSequence::new(30);
        for j in 0..=30 {
            assert_eq!(seq.get(j), &closed_form(j), "j = {j}");
        }
    }

    #[test]
    fn generating_function_partial_sums() {
        let seq = KappaSequence::new(41);
        let z: f64 = 0.25;
        let limit = (1.0 - 2.0 * z).powf(-0.5);
        assert!((limit - 2f64.sqrt()).abs() < 1e-15);
        for j in [5usize, 10, 20, 40] {
            let err = (limit - seq.partial_sum(j, z)).abs();
            assert!(err < seq.tail_bound(j, z), "J = {j}: {err}");
        }
        // the bound itself is not slack by orders of magnitude
        let j = 20;
        assert!((limit - seq.partial_sum(j, z)).abs() > 0.1 * seq.tail_bound(j, z));
        assert!(!seq.get(3).is_negative());
    }

    #[test]
    fn first_iterate_is_linear_flow_and_higher_start_at_zero() {
        let phi = sample_gaussian(4, 1.5, SeedSpec::new(1, 0));
        let chain = PicardChain::compute(3, &phi, 0.1, 0.01).unwrap();
        for (i, f) in chain.iterates[0].fields.iter().enumerate() {
            assert_eq!(f, &linear_propagate(&phi, i as f64 * 0.01));
        }
        for j in 1..=3 {
            let z = &chain.iterates[j];
            assert_eq!(z.n_max(), (2 * j + 1) * 4);
            assert!(z.fields[0].coeffs().iter().all(|c| *c == ZERO));
        }
    }

    #[test]
    fn single_mode_third_iterate_closed_form() {
        // φ = e_1: z_3 = i t e^{it} e_1, the first-order term of the exact solution e^{2it}e_1
        let phi = SpectralField::mode(1.5, 1, 1, Complex64::new(1.0, 0.0));
        let z3 = picard_iterate(1, &phi, 0.2, 0.01).unwrap();
        for (i, f) in z3.fields.iter().enumerate() {
            let t = i as f64 * 0.01;
            let expect = I * t * Complex64::from_polar(1.0, t);
            assert!((f.get(1) - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn residual_decreases_with_order() {
        let phi = SpectralField::mode(1.5, 1, 1, Complex64::new(1.0, 0.0));
        let dt = 1e-3;
        let chain = PicardChain::compute(2, &phi, 0.11, dt).unwrap();
        let at = |j: usize, t: f64| chain.residual(j, (t / dt).round() as usize).unwrap();
        // Z_3 leaves |Z_3|²Z_3 − |z_1|²z_1 = O(t), Z_5 leaves O(t²)
        let r3 = at(1, 0.1) / at(1, 0.05);
        let r5 = at(2, 0.1) / at(2, 0.05);
        assert!((r3 - 2.0).abs() < 0.2, "{r3}");
        assert!((r5 - 4.0).abs() < 0.4, "{r5}");
        for t in [0.05, 0.1] {
            assert!(at(0, t) > at(1, t) && at(1, t) > at(2, t));
        }
    }

    #[test]
    fn residual_of_random_data_improves_with_order() {
        let phi = sample_gaussian(4, 1.5, SeedSpec::new(2, 0));
        let dt = 1e-3;
        let chain = PicardChain::compute(2, &phi, 0.06, dt).unwrap();
        let i = 50;
        let r: Vec<f64> = (0..=2).map(|j| chain.residual(j, i).unwrap()).collect();
        assert!(r[0] > r[1] && r[1] > r[2], "{r:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn iterates_are_homogeneous(seed in any::<u64>()) {
            let phi = sample_gaussian(3, 1.5, SeedSpec::new(seed, 0));
            let scaled = phi.scale(Complex64::new(2.0, 0.0));
            let a = PicardChain::compute(2, &phi, 0.1, 0.01).unwrap();
            let b = PicardChain::compute(2, &scaled, 0.1, 0.01).unwrap();
            for j in 0..=2 {
                let factor = 2f64.powi(2 * j as i32 + 1);
                for i in [5usize, 10] {
                    let expect = a.iterates[j].fields[i].scale(Complex64::new(factor, 0.0));
                    let scale = expect.l2().max(1e-300);
                    prop_assert!(b.iterates[j].fields[i].l2_distance(&expect) / scale < 1e-8);
                }
            }
        }
    }

    #[test]
    fn linear_moment_examples() {
        assert!((linear_second_moment(1, 1.7) - 2.0).abs() < 1e-15);
        let rows = moment_bound_check(0, 1, 1.3, &[0.1, 0.2], 0.01, 20_000, 3).unwrap();
        for r in &rows {
            assert!((r.empirical_mean - 2.0).abs() < 3.0 * r.std_error);
            assert_eq!(r.bound_value, 1.0);
        }
        let exact = linear_second_moment(8, 1.5);
        let rows = moment_bound_check(0, 8, 1.5, &[0.1], 0.01, 20_000, 4).unwrap();
        assert!((rows[0].empirical_mean - exact).abs() < 3.0 * rows[0].std_error);
    }

    #[test]
    fn third_iterate_has_zero_mean() {
        let n = 4;
        let dt = 0.01;
        let samples = 4000;
        let vals: Vec<Complex64> = (0..samples)
            .map(|s| {
                let phi = sample_gaussian(n, 1.5, SeedSpec::new(9, s));
                let z = picard_iterate(1, &phi, 0.2, dt).unwrap();
                z.last().coeffs().iter().sum::<Complex64>()
            })
            .collect();
        let m = samples as f64;
        let mean = vals.iter().sum::<Complex64>() / m;
        let se_re = (vals.iter().map(|v| (v.re - mean.re).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt();
        let se_im = (vals.iter().map(|v| (v.im - mean.im).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt();
        assert!(mean.re.abs() < 3.0 * se_re && mean.im.abs() < 3.0 * se_im, "{mean}");
    }

    #[test]
    fn moment_csv_layout() {
        let rows = moment_bound_check(0, 1, 1.5, &[0.1], 0.05, 10, 1).unwrap();
        let mut buf = Vec::new();
        write_moment_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("j,n,alpha,t,n_samples,empirical_mean,bound_value,ratio\n0,1,1.5,0.1,10,"));
        assert!(moment_bound_check(0, 1, 1.5, &[0.13], 0.05, 10, 1).is_err());
    }
}

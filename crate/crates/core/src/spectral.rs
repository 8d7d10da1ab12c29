//! Fourier representation on the one-dimensional torus.
//!
//! A [`SpectralField`] stores `û(k)` for `|k| ≤ n_max` together with the dispersion
//! exponent `α`. The coefficient convention is `û(k) = (1/2π)∫_T u e^{-ikx} dx`, so the
//! mass carries a factor `2π` through Plancherel.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Result};
use crate::fft;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `|k|^α` with exact fast paths for the integer exponents.
#[inline]
pub fn abs_pow(k: i64, alpha: f64) -> f64 {
    let a = k.unsigned_abs() as f64;
    if alpha == 2.0 {
        a * a
    } else if alpha == 1.0 {
        a
    } else if k == 0 {
        0.0
    } else {
        a.powf(alpha)
    }
}

/// The bracket `[k]^{α/2} = (1 + |k|^α)^{1/2}` used to weight the random data.
pub fn weight_bracket(k: i64, alpha: f64) -> f64 {
    (1.0 + abs_pow(k, alpha)).sqrt()
}

/// The Japanese bracket `⟨x⟩ = (1 + x²)^{1/2}`.
#[inline]
pub fn japanese(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

/// Resonance function `|k1|^α − |k2|^α + |k3|^α − |k1 − k2 + k3|^α`.
pub fn resonance_phi(k1: i64, k2: i64, k3: i64, alpha: f64) -> f64 {
    abs_pow(k1, alpha) - abs_pow(k2, alpha) + abs_pow(k3, alpha) - abs_pow(k1 - k2 + k3, alpha)
}

/// A triple of input frequencies of a cubic interaction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FrequencyTriple {
    pub k1: i64,
    pub k2: i64,
    pub k3: i64,
}

impl FrequencyTriple {
    pub fn new(k1: i64, k2: i64, k3: i64) -> Self {
        Self { k1, k2, k3 }
    }

    /// Output frequency `k1 − k2 + k3`.
    pub fn k(&self) -> i64 {
        self.k1 - self.k2 + self.k3
    }

    /// Membership in the non-resonant hyperplane: `k2 ≠ k1` and `k2 ≠ k3`.
    pub fn is_admissible(&self) -> bool {
        self.k2 != self.k1 && self.k2 != self.k3
    }

    pub fn phi(&self, alpha: f64) -> f64 {
        resonance_phi(self.k1, self.k2, self.k3, alpha)
    }
}

/// Dyadic frequency scale `2^e`, with `e = −1` standing for the scale `1/2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dyadic(i32);

impl Dyadic {
    pub const HALF: Dyadic = Dyadic(-1);
    pub const ONE: Dyadic = Dyadic(0);

    /// Scale `n`, which must be a power of two.
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(invalid(format!("{n} is not a dyadic scale")));
        }
        Ok(Dyadic(n.trailing_zeros() as i32))
    }

    pub fn from_exponent(e: i32) -> Self {
        assert!(e >= -1, "dyadic exponent below -1");
        Dyadic(e)
    }

    pub fn exponent(self) -> i32 {
        self.0
    }

    pub fn is_half(self) -> bool {
        self.0 < 0
    }

    pub fn value(self) -> f64 {
        2f64.powi(self.0)
    }

    /// Largest integer frequency inside the scale, `⌊N⌋`.
    pub fn cutoff(self) -> usize {
        if self.0 < 0 {
            0
        } else {
            1usize << self.0
        }
    }

    pub fn half(self) -> Dyadic {
        assert!(self.0 >= 0, "no dyadic scale below 1/2");
        Dyadic(self.0 - 1)
    }

    pub fn double(self) -> Dyadic {
        Dyadic(self.0 + 1)
    }

    /// Whether `k` lies in the shell of this scale (`N/2 < |k| ≤ N`, or `k = 0` for `1/2`).
    pub fn shell_contains(self, k: i64) -> bool {
        if self.is_half() {
            return k == 0;
        }
        let a = k.unsigned_abs() as usize;
        let n = self.cutoff();
        2 * a > n && a <= n
    }

    /// Shell frequencies in ascending order.
    pub fn shell(self) -> Vec<i64> {
        let n = self.cutoff() as i64;
        (-n..=n).filter(|&k| self.shell_contains(k)).collect()
    }

    /// `1/2, 1, 2, …, max` inclusive.
    pub fn ladder(max: Dyadic) -> Vec<Dyadic> {
        (-1..=max.0).map(Dyadic).collect()
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_half() {
            write!(f, "1/2")
        } else {
            write!(f, "{}", self.cutoff())
        }
    }
}

/// Which frequencies a projection keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectionMode {
    /// `|k| ≤ N`.
    Full,
    /// `N/2 < |k| ≤ N` (just `k = 0` at scale `1/2`).
    Shell,
    /// `|k| > N`.
    Complement,
}

/// Fourier coefficients of a function on the torus at a fixed cutoff.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    alpha: f64,
    n_max: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(alpha: f64, n_max: usize) -> Self {
        Self {
            alpha,
            n_max,
            coeffs: vec![ZERO; 2 * n_max + 1],
        }
    }

    /// Build a field from coefficients ordered by ascending `k` from `-n_max`.
    pub fn from_coeffs(alpha: f64, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() % 2 != 1 {
            return Err(invalid("coefficient vector must have odd length 2·n_max + 1"));
        }
        if !(1.0..=2.0).contains(&alpha) {
            return Err(invalid(format!("alpha = {alpha} outside [1, 2]")));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(invalid("non-finite coefficient"));
        }
        Ok(Self {
            alpha,
            n_max: coeffs.len() / 2,
            coeffs,
        })
    }

    /// Unchecked constructor for integrator internals; finiteness is checked by the caller.
    pub(crate) fn from_raw(alpha: f64, coeffs: Vec<Complex64>) -> Self {
        debug_assert!(coeffs.len() % 2 == 1);
        Self {
            alpha,
            n_max: coeffs.len() / 2,
            coeffs,
        }
    }

    /// The plane wave `c·e_k` at cutoff `n_max`.
    pub fn mode(alpha: f64, n_max: usize, k: i64, c: Complex64) -> Self {
        let mut f = Self::zeros(alpha, n_max);
        f.set(k, c);
        f
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    #[inline]
    pub fn index(&self, k: i64) -> Option<usize> {
        let n = self.n_max as i64;
        (-n..=n).contains(&k).then(|| (k + n) as usize)
    }

    /// Coefficient at `k`, zero outside the stored range.
    #[inline]
    pub fn get(&self, k: i64) -> Complex64 {
        self.index(k).map_or(ZERO, |i| self.coeffs[i])
    }

    /// Set the coefficient at `k`. Panics if `|k| > n_max`.
    pub fn set(&mut self, k: i64, c: Complex64) {
        let i = self
            .index(k)
            .unwrap_or_else(|| panic!("mode {k} outside cutoff {}", self.n_max));
        self.coeffs[i] = c;
    }

    /// Frequencies `-n_max..=n_max`.
    pub fn frequencies(&self) -> impl Iterator<Item = i64> {
        let n = self.n_max as i64;
        -n..=n
    }

    /// `(k, û(k))` pairs in ascending `k`.
    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.frequencies().zip(self.coeffs.iter().copied())
    }

    /// Same function stored at a different cutoff (truncating or zero-padding).
    pub fn with_cutoff(&self, n_max: usize) -> Self {
        let mut out = Self::zeros(self.alpha, n_max);
        let n = n_max.min(self.n_max) as i64;
        for k in -n..=n {
            out.set(k, self.get(k));
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|_, z| z * c)
    }

    /// Apply `f(k, û(k))` to every mode.
    pub fn map(&self, mut f: impl FnMut(i64, Complex64) -> Complex64) -> Self {
        let coeffs = self.modes().map(|(k, c)| f(k, c)).collect();
        Self {
            alpha: self.alpha,
            n_max: self.n_max,
            coeffs,
        }
    }

    /// `‖û‖_{l²}`.
    pub fn l2(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest coefficient difference against another field (missing modes count as zero).
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let n = self.n_max.max(other.n_max) as i64;
        (-n..=n)
            .map(|k| (self.get(k) - other.get(k)).norm())
            .fold(0.0, f64::max)
    }

    /// `‖û − v̂‖_{l²}`.
    pub fn l2_distance(&self, other: &Self) -> f64 {
        let n = self.n_max.max(other.n_max) as i64;
        (-n..=n)
            .map(|k| (self.get(k) - other.get(k)).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Values on the uniform grid of `m` points `x_j = 2πj/m`.
    pub fn to_physical(&self, m: usize) -> Vec<Complex64> {
        fft::synthesize(&self.coeffs, m)
    }

    /// Evaluate `u(x)` directly from the series.
    pub fn eval(&self, x: f64) -> Complex64 {
        self.modes()
            .map(|(k, c)| c * Complex64::from_polar(1.0, k as f64 * x))
            .sum()
    }
}

fn zip_with(a: &SpectralField, b: &SpectralField, f: impl Fn(Complex64, Complex64) -> Complex64) -> SpectralField {
    let n = a.n_max.max(b.n_max);
    let mut out = SpectralField::zeros(a.alpha, n);
    for k in out.frequencies().collect::<Vec<_>>() {
        out.set(k, f(a.get(k), b.get(k)));
    }
    out
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: Self) -> SpectralField {
        zip_with(self, rhs, |x, y| x + y)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: Self) -> SpectralField {
        zip_with(self, rhs, |x, y| x - y)
    }
}

impl Mul<Complex64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: Complex64) -> SpectralField {
        self.scale(rhs)
    }
}

/// Frequency projection at a dyadic scale. The cutoff of the result equals the input's.
pub fn project(u: &SpectralField, scale: Dyadic, mode: ProjectionMode) -> SpectralField {
    let n = scale.cutoff() as u64;
    u.map(|k, c| {
        let a = k.unsigned_abs();
        let keep = match mode {
            ProjectionMode::Full => a <= n,
            ProjectionMode::Shell => scale.shell_contains(k),
            ProjectionMode::Complement => a > n,
        };
        if keep {
            c
        } else {
            ZERO
        }
    })
}

/// Sharp projection `Π_n` onto `|k| ≤ n` for an arbitrary integer cutoff.
pub fn project_to(u: &SpectralField, n: usize) -> SpectralField {
    u.map(|k, c| if k.unsigned_abs() as usize <= n { c } else { ZERO })
}

fn check_alpha(fields: &[&SpectralField]) {
    let a = fields[0].alpha;
    assert!(
        fields.iter().all(|f| f.alpha == a),
        "trilinear forms need matching alpha"
    );
}

/// Full pointwise product `f1·conj(f2)·f3`, returned at cutoff `n_out`.
///
/// The padded grid is large enough that no product frequency aliases into `|k| ≤ n_out`,
/// so the retained coefficients are the exact convolution sums.
pub fn cubic_product(
    f1: &SpectralField,
    f2: &SpectralField,
    f3: &SpectralField,
    n_out: Option<usize>,
) -> SpectralField {
    check_alpha(&[f1, f2, f3]);
    let span = f1.n_max + f2.n_max + f3.n_max;
    let n_out = n_out.unwrap_or(span);
    let m = fft::grid_len(span + n_out);
    let g1 = f1.to_physical(m);
    let g2 = if std::ptr::eq(f1, f2) {
        g1.clone()
    } else {
        f2.to_physical(m)
    };
    let g3 = if std::ptr::eq(f3, f1) {
        g1.clone()
    } else if std::ptr::eq(f3, f2) {
        g2.clone()
    } else {
        f3.to_physical(m)
    };
    let prod: Vec<Complex64> = g1
        .iter()
        .zip(&g2)
        .zip(&g3)
        .map(|((a, b), c)| a * b.conj() * c)
        .collect();
    SpectralField {
        alpha: f1.alpha,
        n_max: n_out,
        coeffs: fft::analyze(prod, n_out),
    }
}

/// Diagonal form `N₀(f1,f2,f3) = Σ_k f̂1(k) conj(f̂2(k)) f̂3(k) e_k`.
pub fn trilinear_n0(f1: &SpectralField, f2: &SpectralField, f3: &SpectralField) -> SpectralField {
    check_alpha(&[f1, f2, f3]);
    let n = f1.n_max.min(f2.n_max).min(f3.n_max);
    let mut out = SpectralField::zeros(f1.alpha, n);
    for k in -(n as i64)..=(n as i64) {
        out.set(k, f1.get(k) * f2.get(k).conj() * f3.get(k));
    }
    out
}

/// Non-resonant trilinear form
/// `N₃(f1,f2,f3)(k) = Σ_{k1−k2+k3=k, k2≠k1, k2≠k3} f̂1(k1) conj(f̂2(k2)) f̂3(k3)`.
///
/// Computed as the full product minus the two paired sums plus the doubly counted diagonal.
/// The output cutoff defaults to the sum of the input cutoffs.
pub fn trilinear_n3(f1: &SpectralField, f2: &SpectralField, f3: &SpectralField, n_out: Option<usize>) -> SpectralField {
    let mut out = cubic_product(f1, f2, f3, n_out);
    let pair12: Complex64 = f1.modes().map(|(k, c)| c * f2.get(k).conj()).sum();
    let pair23: Complex64 = f3.modes().map(|(k, c)| f2.get(k).conj() * c).sum();
    let n = out.n_max as i64;
    for k in -n..=n {
        let d = f1.get(k) * f2.get(k).conj() * f3.get(k);
        let i = (k + n) as usize;
        out.coeffs[i] += -pair12 * f3.get(k) - pair23 * f1.get(k) + d;
    }
    out
}

/// Mass `M(u) = ∫_T |u|² dx = 2π Σ |û(k)|²`.
pub fn mass(u: &SpectralField) -> f64 {
    2.0 * PI * u.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
}

/// `∫_T |u|⁴ dx`, exact for band-limited `u`.
///
/// Small cutoffs use the autocorrelation form `2π Σ_m |ŵ(m)|²` with `w = |u|²`;
/// larger ones use trapezoidal quadrature on a grid of more than `4·n_max` points.
pub fn quartic_integral(u: &SpectralField) -> f64 {
    let n = u.n_max;
    if n <= 24 {
        let c = &u.coeffs;
        let len = c.len();
        let mut total = 0.0;
        // ŵ(m) = Σ_k û(k+m) conj(û(k)); |ŵ(-m)| = |ŵ(m)|.
        for m in 0..len {
            let w: Complex64 = (0..len - m).map(|i| c[i + m] * c[i].conj()).sum();
            total += if m == 0 { w.norm_sqr() } else { 2.0 * w.norm_sqr() };
        }
        2.0 * PI * total
    } else {
        let m = fft::grid_len(4 * n);
        let grid = u.to_physical(m);
        let mean: f64 = grid.iter().map(|z| z.norm_sqr().powi(2)).sum::<f64>() / m as f64;
        2.0 * PI * mean
    }
}

/// Kinetic part `∫ ||D|^{α/2} u|² dx = 2π Σ |k|^α |û(k)|²`.
pub fn kinetic_energy(u: &SpectralField) -> f64 {
    2.0 * PI * u.modes().map(|(k, c)| abs_pow(k, u.alpha) * c.norm_sqr()).sum::<f64>()
}

/// Hamiltonian `H(u) = ∫ ||D|^{α/2}u|² + (1/2)∫|u|⁴`.
pub fn hamiltonian(u: &SpectralField) -> f64 {
    kinetic_energy(u) + 0.5 * quartic_integral(u)
}

/// Truncated Hamiltonian `H_n(u) = H(Π_n u)`.
pub fn truncated_hamiltonian(u: &SpectralField, n: usize) -> f64 {
    hamiltonian(&project_to(u, n))
}

#[derive(Serialize, Deserialize)]
struct FieldRecord {
    alpha: f64,
    n_max: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Serialize for SpectralField {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FieldRecord {
            alpha: self.alpha,
            n_max: self.n_max,
            re: self.coeffs.iter().map(|c| c.re).collect(),
            im: self.coeffs.iter().map(|c| c.im).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpectralField {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let rec = FieldRecord::deserialize(d)?;
        if rec.re.len() != 2 * rec.n_max + 1 || rec.im.len() != rec.re.len() {
            return Err(D::Error::custom("re/im length must be 2·n_max + 1"));
        }
        let coeffs = rec
            .re
            .iter()
            .zip(&rec.im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        SpectralField::from_coeffs(rec.alpha, coeffs).map_err(D::Error::custom)
    }
}

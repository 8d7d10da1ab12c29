//! Threshold arithmetic: the constraint margin, its root `α₀`, and the hierarchy of
//! numerical constants decided exactly in the regime `σ → 0⁺`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

fn s0(alpha: f64) -> f64 {
    0.5 - alpha / 4.0
}

fn nu0(alpha: f64) -> f64 {
    s0(alpha).min(1.75 * (alpha - 1.0))
}

/// `(α−1) + 2s₀ν₀ − s₀` with `s₀ = 1/2 − α/4`, `ν₀ = min{s₀, 7(α−1)/4}`.
pub fn constraint_margin(alpha: f64) -> f64 {
    let (s, nu) = (s0(alpha), nu0(alpha));
    (alpha - 1.0) + 2.0 * s * nu - s
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Exact margin for rational `α`.
pub fn constraint_margin_exact(alpha: &BigRational) -> BigRational {
    let one = BigRational::one();
    let s = rat(1, 2) - alpha * rat(1, 4);
    let branch = (alpha - &one) * rat(7, 4);
    let nu = if branch < s { branch } else { s.clone() };
    (alpha - &one) + rat(2, 1) * &s * &nu - &s
}

/// `α₀ = (31 − √233)/14`.
pub fn alpha0() -> f64 {
    (31.0 - 233f64.sqrt()) / 14.0
}

/// Root of `−7a² + 17a − 2`, the margin scaled by 8 on the branch `ν₀ = 7(α−1)/4`,
/// written as `1 + a` and evaluated in the cancellation-free form.
pub fn alpha0_from_quadratic() -> f64 {
    let (a, b, c) = (-7.0f64, 17.0f64, -2.0f64);
    let disc = (b * b - 4.0 * a * c).sqrt();
    let q = -0.5 * (b + b.signum() * disc);
    // the other root q/a lies outside (0, 1/8)
    1.0 + c / q
}

/// Sign change of [`constraint_margin`] located by bisection on `[lo, hi]`.
pub fn margin_root(lo: f64, hi: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (constraint_margin(a), constraint_margin(b));
    if fa.signum() == fb.signum() {
        return Err(invalid(format!("margin does not change sign on [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if constraint_margin(m).signum() == fa.signum() {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Terms of order above this are dropped from products and reciprocals.
pub const SERIES_ORDER: i64 = 1000;

/// Finite Laurent series `Σ c_e σ^e` with exact rational coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SigmaSeries {
    terms: BTreeMap<i64, BigRational>,
}

impl SigmaSeries {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: BigRational) -> Self {
        Self::term(c, 0)
    }

    /// `c σ^e`.
    pub fn term(c: BigRational, e: i64) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(e, c);
        }
        Self { terms }
    }

    pub fn monomial(num: i64, den: i64, e: i64) -> Self {
        Self::term(rat(num, den), e)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Lowest-order term, which decides the sign for small `σ`.
    pub fn leading(&self) -> Option<(i64, &BigRational)> {
        self.terms.iter().next().map(|(e, c)| (*e, c))
    }

    pub fn leading_exponent(&self) -> Option<i64> {
        self.leading().map(|(e, _)| e)
    }

    /// Sign as `σ → 0⁺`.
    pub fn sign(&self) -> i32 {
        match self.leading() {
            None => 0,
            Some((_, c)) if c.is_positive() => 1,
            Some(_) => -1,
        }
    }

    fn truncate(mut self) -> Self {
        self.terms.retain(|&e, c| e <= SERIES_ORDER && !c.is_zero());
        self
    }

    /// `1/self` expanded about the leading term to [`SERIES_ORDER`].
    pub fn recip(&self) -> Result<Self> {
        let (e0, c0) = self.leading().ok_or_else(|| invalid("reciprocal of the zero series"))?;
        let inv_c0 = c0.recip();
        // self = c0 σ^e0 (1 + r), r has positive exponents only
        let r = self.clone() * Self::term(inv_c0.clone(), -e0) - Self::constant(BigRational::one());
        let mut sum = Self::constant(BigRational::one());
        let mut power = Self::constant(BigRational::one());
        // each power raises the lowest exponent, so truncation ends the loop
        loop {
            power = power * -r.clone();
            if power.is_zero() {
                break;
            }
            sum = sum + power.clone();
        }
        Ok((sum * Self::term(inv_c0, -e0)).truncate())
    }

    /// Asymptotic minimum for small `σ`.
    pub fn min(&self, other: &Self) -> Self {
        if (self.clone() - other.clone()).sign() <= 0 {
            self.clone()
        } else {
            other.clone()
        }
    }

    /// Value at a concrete `σ`; only meaningful where no term underflows.
    pub fn eval(&self, sigma: f64) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c.to_f64().unwrap_or(f64::NAN) * sigma.powi(*e as i32))
            .sum()
    }
}

impl Add for SigmaSeries {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for (e, c) in rhs.terms {
            *self.terms.entry(e).or_insert_with(BigRational::zero) += c;
        }
        self.terms.retain(|_, c| !c.is_zero());
        self
    }
}

impl Neg for SigmaSeries {
    type Output = Self;
    fn neg(mut self) -> Self {
        for c in self.terms.values_mut() {
            *c = -c.clone();
        }
        self
    }
}

impl Sub for SigmaSeries {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + -rhs
    }
}

impl Mul for SigmaSeries {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut out = Self::zero();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &rhs.terms {
                out = out + Self::term(c1 * c2, e1 + e2);
            }
        }
        out.truncate()
    }
}

impl fmt::Display for SigmaSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (e, c)) in self.terms.iter().enumerate() {
            let sign = if c.is_negative() {
                "-"
            } else if i > 0 {
                "+"
            } else {
                ""
            };
            if i > 0 {
                write!(f, " {sign} ")?;
            } else {
                write!(f, "{sign}")?;
            }
            let mag = c.abs();
            match *e {
                0 => write!(f, "{mag}")?,
                e if mag.is_one() => write!(f, "σ^{e}")?,
                e => write!(f, "{mag}·σ^{e}")?,
            }
        }
        Ok(())
    }
}

/// Constants of the hierarchy as exact `σ`-series at a rational `α`.
#[derive(Clone, Debug, PartialEq)]
pub struct NumericHierarchy {
    pub alpha: BigRational,
    pub b0: SigmaSeries,
    pub b: SigmaSeries,
    pub b1: SigmaSeries,
    pub theta: SigmaSeries,
    pub q_inv: SigmaSeries,
    pub kappa: SigmaSeries,
    pub eps1: SigmaSeries,
    pub eps2: SigmaSeries,
    pub delta: SigmaSeries,
    pub delta0: SigmaSeries,
    pub s: SigmaSeries,
    pub nu: SigmaSeries,
}

impl NumericHierarchy {
    pub fn new(alpha: BigRational) -> Self {
        let m = SigmaSeries::monomial;
        let half = m(1, 2, 0);
        let one = BigRational::one();
        let s0 = SigmaSeries::constant(rat(1, 2) - &alpha * rat(1, 4));
        let branch = SigmaSeries::constant((&alpha - &one) * rat(7, 4));
        let eps1 = m(1, 1, 2);
        Self {
            b0: half.clone() + m(1, 1, 200),
            b: half.clone() + m(2, 1, 200),
            b1: half + m(3, 1, 200),
            theta: m(1, 100, 200),
            q_inv: m(1, 1, 50),
            kappa: m(1, 1, -500),
            eps2: eps1.clone() + m(100, 1, 5),
            eps1,
            delta: m(1, 1, 20),
            delta0: m(1, 1, 10),
            s: s0.clone() + m(1, 1, 1),
            nu: s0.min(&branch) - m(1, 1, 1),
            alpha,
        }
    }

    /// Conjugate exponent `q' = 1/(1 − 1/q)`.
    pub fn q_prime(&self) -> Result<SigmaSeries> {
        (SigmaSeries::constant(BigRational::one()) - self.q_inv.clone()).recip()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchyCheck {
    pub name: String,
    /// The quantity whose small-`σ` sign decides the inequality, or the two leading
    /// exponents for a `≪` comparison.
    pub witness: String,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchyReport {
    pub alpha: String,
    pub checks: Vec<HierarchyCheck>,
}

impl HierarchyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn violations(&self) -> Vec<&HierarchyCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

fn positive(name: &str, gap: SigmaSeries) -> HierarchyCheck {
    HierarchyCheck {
        name: name.into(),
        passed: gap.sign() > 0,
        witness: gap.to_string(),
    }
}

fn nonnegative(name: &str, gap: SigmaSeries) -> HierarchyCheck {
    HierarchyCheck {
        name: name.into(),
        passed: gap.sign() >= 0,
        witness: gap.to_string(),
    }
}

/// `small ≪ large`: both positive for small `σ` and the leading exponent of `small`
/// strictly exceeds that of `large`.
fn much_less(name: &str, small: &SigmaSeries, large: &SigmaSeries) -> HierarchyCheck {
    let (es, el) = (small.leading_exponent(), large.leading_exponent());
    let passed = small.sign() > 0 && large.sign() > 0 && matches!((es, el), (Some(a), Some(b)) if a > b);
    HierarchyCheck {
        name: name.into(),
        witness: format!(
            "leading exponents {} vs {}",
            es.map_or("-".into(), |e| e.to_string()),
            el.map_or("-".into(), |e| e.to_string())
        ),
        passed,
    }
}

/// Every inequality of the hierarchy, decided by the leading term of an exact `σ`-series.
pub fn hierarchy_checks(h: &NumericHierarchy) -> Result<HierarchyReport> {
    let c = |n: i64| SigmaSeries::monomial(n, 1, 0);
    let one = c(1);
    let half = SigmaSeries::monomial(1, 2, 0);
    let alpha = SigmaSeries::constant(h.alpha.clone());
    let branch = SigmaSeries::constant((&h.alpha - BigRational::one()) * rat(7, 4));
    let qp = h.q_prime()?;

    let nu_bound = h.s.min(&branch) - c(100) * (h.eps1.clone() + h.eps2.clone());
    let b1_excess = h.b1.clone() - half.clone();
    let ratio = b1_excess.clone() * (qp.clone() - one.clone()).recip()?;
    let gap = qp.clone() - c(2) * h.b1.clone();
    let margin = (alpha - one.clone()) + c(2) * h.s.clone() * h.nu.clone() - h.s.clone();

    let checks = vec![
        nonnegative("nu <= min{s, 7(alpha-1)/4} - 100(eps1+eps2)", nu_bound - h.nu.clone()),
        much_less("(b1-1/2)/(q'-1) << q'-2b1", &ratio, &gap),
        much_less("q'-2b1 << 1", &gap, &one),
        positive(
            "eps1 > 100(b1-1/2+1/q+theta)",
            h.eps1.clone() - c(100) * (b1_excess + h.q_inv.clone() + h.theta.clone()),
        ),
        positive("(alpha-1)+2s*nu-s > 0", margin),
        positive("b0 < b", h.b.clone() - h.b0.clone()),
        positive("b < b1", h.b1.clone() - h.b.clone()),
        positive("b1 < q'/2", half * qp - h.b1.clone()),
    ];
    Ok(HierarchyReport {
        alpha: h.alpha.to_string(),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_reciprocal_of_geometric() {
        let s = SigmaSeries::monomial(1, 1, 0) - SigmaSeries::monomial(1, 1, 50);
        let r = s.recip().unwrap();
        assert_eq!(r.terms.len(), 21);
        assert!(r.terms.iter().all(|(e, c)| e % 50 == 0 && c.is_one()));
    }

    #[test]
    fn display() {
        let s = SigmaSeries::monomial(1, 2, 0) - SigmaSeries::monomial(3, 1, 200);
        assert_eq!(s.to_string(), "1/2 - 3·σ^200");
    }
}

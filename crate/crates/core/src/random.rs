//! Reproducible Gaussian and Gibbs sampling.
//!
//! Every random draw is keyed by `(master_seed, sample_index, proposal, k)` and
//! produced by a freshly seeded generator, so a coefficient never depends on how many
//! other modes or samples were generated before it, nor on the thread schedule.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::{abs_pow, SpectralField};

pub use crate::spectral::quartic_integral;

/// Gibbs potential `(1/2)⨍|u|⁴`, the quartic integral against the normalized measure `dx/2π`.
///
/// With `μ` the law of `Σ g_k [k]^{-α/2} e^{ikx}`, the density of `e^{-V} dμ` on the coefficients
/// is `exp(-Σ|k|^α|û(k)|² - V - Σ|û(k)|²)`, and the coefficient flow conserves
/// `Σ|k|^α|û(k)|² + V = H/2π` and `Σ|û(k)|² = M/2π`. The unnormalized `(1/2)∫|u|⁴` would break
/// invariance by a factor `2π` between the kinetic and quartic parts.
pub fn gibbs_potential(u: &SpectralField) -> f64 {
    quartic_integral(u) / (4.0 * PI)
}

/// Identifies one random sample inside a seeded ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub sample_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, sample_index: u64) -> Self {
        Self {
            master_seed,
            sample_index,
        }
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// Tag reserved for the accept/reject uniform; mode tags are zigzag-encoded frequencies.
const ACCEPT_TAG: u64 = u64::MAX;

fn stream(seed: SeedSpec, proposal: u64, tag: u64) -> SmallRng {
    let mut h = splitmix64(seed.master_seed);
    h = splitmix64(h ^ seed.sample_index);
    h = splitmix64(h ^ proposal.rotate_left(17));
    h = splitmix64(h ^ tag.rotate_left(41));
    SmallRng::seed_from_u64(h)
}

/// Generator keyed by `(seed, tag)` for auxiliary draws such as random query sweeps.
pub fn keyed_rng(seed: SeedSpec, tag: u64) -> SmallRng {
    stream(seed, u64::MAX - 1, tag)
}

#[inline]
fn zigzag(k: i64) -> u64 {
    ((k << 1) ^ (k >> 63)) as u64
}

/// Standard complex Gaussian `g_k = (ξ + iη)/√2` for one keyed mode.
pub fn complex_gaussian(seed: SeedSpec, proposal: u64, k: i64) -> Complex64 {
    let mut rng = stream(seed, proposal, zigzag(k));
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn shifted_gaussian(n: usize, alpha: f64, seed: SeedSpec, proposal: u64, mass_shift: f64) -> SpectralField {
    let mut f = SpectralField::zeros(alpha, n);
    let n = n as i64;
    for k in -n..=n {
        let scale = (1.0 + abs_pow(k, alpha) + mass_shift).sqrt();
        f.set(k, complex_gaussian(seed, proposal, k) / scale);
    }
    f
}

/// Draw `û(k) = g_k / (1 + |k|^α)^{1/2}` for `|k| ≤ n`.
pub fn sample_gaussian(n: usize, alpha: f64, seed: SeedSpec) -> SpectralField {
    shifted_gaussian(n, alpha, seed, 0, 0.0)
}

/// Exact rejection sampler for the truncated Gibbs measure
/// `dρ_n ∝ exp(−(1/2)∫|Π_n u|⁴) dμ_n`.
///
/// Proposals are Gaussian with precision `1 + |k|^α + a`. Because
/// `(1/2)∫|u|⁴ ≥ π(Σ|û|²)²`, the density of `ρ_n` against the proposal is bounded by
/// `exp(a²/4π)`, and accepting with probability `exp(−(1/2)∫|u|⁴ + aΣ|û|² − a²/4π)`
/// yields exact samples for any `a ≥ 0`. With `a = 0` the proposals are draws of `μ_n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsSampler {
    pub n: usize,
    pub alpha: f64,
    pub mass_shift: f64,
    pub cap: u64,
}

pub const DEFAULT_PROPOSAL_CAP: u64 = 1_000_000;

impl GibbsSampler {
    /// Proposals drawn directly from the Gaussian measure.
    pub fn plain(n: usize, alpha: f64) -> Self {
        Self {
            n,
            alpha,
            mass_shift: 0.0,
            cap: DEFAULT_PROPOSAL_CAP,
        }
    }

    /// Mass shift balancing the proposal mean mass against the envelope maximizer `S = a`.
    pub fn tuned(n: usize, alpha: f64) -> Self {
        let mean_mass = |a: f64| -> f64 {
            let n = n as i64;
            (-n..=n).map(|k| 1.0 / (1.0 + abs_pow(k, alpha) + a)).sum()
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while mean_mass(hi) > hi {
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if mean_mass(mid) > mid {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Self {
            mass_shift: 0.5 * (lo + hi),
            ..Self::plain(n, alpha)
        }
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    fn proposal(&self, seed: SeedSpec, index: u64) -> SpectralField {
        shifted_gaussian(self.n, self.alpha, seed, index, self.mass_shift)
    }

    /// Log acceptance probability of a proposal (always ≤ 0).
    pub fn log_accept(&self, u: &SpectralField) -> f64 {
        let a = self.mass_shift;
        let s: f64 = u.coeffs().iter().map(|c| c.norm_sqr()).sum();
        (-gibbs_potential(u) + a * s - 0.5 * a * a).min(0.0)
    }

    /// Draw one sample. Returns the accepted field and the number of proposals consumed.
    pub fn sample(&self, seed: SeedSpec) -> Result<(SpectralField, u64)> {
        let a = self.mass_shift;
        for index in 0..self.cap {
            let uniform: f64 = stream(seed, index, ACCEPT_TAG).random();
            let log_u = uniform.ln();
            let u = self.proposal(seed, index);
            let s: f64 = u.coeffs().iter().map(|c| c.norm_sqr()).sum();
            // cheap upper bound on the log acceptance ratio from ⨍|u|⁴ ≥ S²
            if log_u > -0.5 * s * s + a * s - 0.5 * a * a {
                continue;
            }
            if log_u <= self.log_accept(&u) {
                return Ok((u, index + 1));
            }
        }
        Err(Error::ProposalCapExceeded {
            cap: self.cap,
            n: self.n,
            alpha: self.alpha,
        })
    }

    /// Rao–Blackwellized acceptance probability: mean and standard error of the
    /// acceptance ratio over `proposals` keyed proposals.
    pub fn acceptance_estimate(&self, seed: SeedSpec, proposals: u64) -> (f64, f64) {
        let vals: Vec<f64> = (0..proposals)
            .into_par_iter()
            .map(|i| self.log_accept(&self.proposal(seed, i)).exp())
            .collect();
        let m = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / m;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        (mean, (var / m).sqrt())
    }
}

/// Draw one Gibbs sample with the plain Gaussian proposal.
pub fn gibbs_rejection_sample(n: usize, alpha: f64, seed: SeedSpec) -> Result<(SpectralField, u64)> {
    GibbsSampler::plain(n, alpha).sample(seed)
}

/// A seeded collection of Gibbs samples.
#[derive(Clone, Debug)]
pub struct GibbsEnsemble {
    pub samples: Vec<SpectralField>,
    pub n: usize,
    pub alpha: f64,
    pub master_seed: u64,
    pub proposals_used: u64,
    pub acceptance_rate: f64,
}

#[derive(Serialize, Deserialize)]
struct EnsembleHeader {
    n: usize,
    alpha: f64,
    master_seed: u64,
    count: usize,
    acceptance_rate: f64,
}

impl GibbsEnsemble {
    /// Sample indices `0..count` under `master_seed`, in parallel.
    pub fn generate(sampler: &GibbsSampler, master_seed: u64, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(invalid("ensemble needs at least one sample"));
        }
        let draws: Vec<(SpectralField, u64)> = (0..count as u64)
            .into_par_iter()
            .map(|i| sampler.sample(SeedSpec::new(master_seed, i)))
            .collect::<Result<_>>()?;
        let proposals_used: u64 = draws.iter().map(|d| d.1).sum();
        Ok(Self {
            samples: draws.into_iter().map(|d| d.0).collect(),
            n: sampler.n,
            alpha: sampler.alpha,
            master_seed,
            proposals_used,
            acceptance_rate: count as f64 / proposals_used as f64,
        })
    }

    /// JSON lines: one header record, then one field per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = EnsembleHeader {
            n: self.n,
            alpha: self.alpha,
            master_seed: self.master_seed,
            count: self.samples.len(),
            acceptance_rate: self.acceptance_rate,
        };
        serde_json::to_writer(&mut w, &header)?;
        writeln!(w)?;
        for f in &self.samples {
            serde_json::to_writer(&mut w, f)?;
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header: EnsembleHeader = match lines.next() {
            Some(line) => serde_json::from_str(&line?)?,
            None => return Err(invalid("empty ensemble file")),
        };
        let mut samples = Vec::with_capacity(header.count);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: SpectralField = serde_json::from_str(&line)?;
            if f.n_max() != header.n || f.alpha() != header.alpha {
                return Err(invalid("sample does not match ensemble header"));
            }
            samples.push(f);
        }
        if samples.len() != header.count {
            return Err(invalid(format!(
                "header announces {} samples, found {}",
                header.count,
                samples.len()
            )));
        }
        let proposals_used = (header.count as f64 / header.acceptance_rate).round() as u64;
        Ok(Self {
            samples,
            n: header.n,
            alpha: header.alpha,
            master_seed: header.master_seed,
            proposals_used,
            acceptance_rate: header.acceptance_rate,
        })
    }
}

//! Browser bindings: the constraint margin, a Gibbs-sample simulation, and the pair level-set counter.

use fnls_core::counting::pair_levelset_count;
use fnls_core::dynamics::{evolve, Variant};
use fnls_core::random::{GibbsSampler, SeedSpec};
use fnls_core::spectral::{hamiltonian, mass};
use fnls_core::threshold;
use wasm_bindgen::prelude::*;

fn js_err(e: fnls_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn alpha0() -> f64 {
    threshold::alpha0()
}

/// Margin sampled at `points` equally spaced values of alpha in `[lo, hi]`.
#[wasm_bindgen]
pub fn margin_curve(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let step = if points > 1 {
        (hi - lo) / (points - 1) as f64
    } else {
        0.0
    };
    (0..points)
        .map(|i| threshold::constraint_margin(lo + step * i as f64))
        .collect()
}

/// A truncated Gibbs sample evolved under the full cubic flow.
#[wasm_bindgen]
pub struct Simulation {
    times: Vec<f64>,
    mass_drift: Vec<f64>,
    energy_drift: Vec<f64>,
    initial: Vec<f64>,
    last: Vec<f64>,
}

impl Simulation {
    pub fn run(seed: u64, alpha: f64, n: usize, t_final: f64, dt: f64, points: usize) -> fnls_core::Result<Self> {
        let (u0, _) = GibbsSampler::tuned(n, alpha).sample(SeedSpec::new(seed, 0))?;
        let traj = evolve(&u0, t_final, dt, Variant::FullCubic)?;
        let drift = |f: fn(&fnls_core::SpectralField) -> f64| {
            let f0 = f(traj.first());
            traj.fields.iter().map(|u| (f(u) - f0) / f0).collect::<Vec<_>>()
        };
        let profile = |u: &fnls_core::SpectralField| u.to_physical(points).iter().map(|z| z.norm()).collect();
        Ok(Simulation {
            times: traj.times(),
            mass_drift: drift(mass),
            energy_drift: drift(hamiltonian),
            initial: profile(traj.first()),
            last: profile(traj.last()),
        })
    }
}

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, alpha: f64, n: usize, t_final: f64, dt: f64, points: usize) -> Result<Simulation, JsError> {
        Self::run(seed, alpha, n, t_final, dt, points).map_err(js_err)
    }

    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    /// Relative mass deviation at each stored time.
    pub fn mass_drift(&self) -> Vec<f64> {
        self.mass_drift.clone()
    }

    pub fn energy_drift(&self) -> Vec<f64> {
        self.energy_drift.clone()
    }

    /// `|u(0, x)|` on a uniform grid of the torus.
    pub fn initial_profile(&self) -> Vec<f64> {
        self.initial.clone()
    }

    pub fn final_profile(&self) -> Vec<f64> {
        self.last.clone()
    }
}

/// `[count, bound]` for the pair level set `||k|^α + |a-k|^α - l| <= r` on the given shells.
pub fn pair_count_values(a: f64, l: f64, m1: u32, m2: u32, r: f64, alpha: f64) -> fnls_core::Result<Vec<f64>> {
    let c = pair_levelset_count(a, l, m1 as u64, m2 as u64, r, alpha)?;
    Ok(vec![c.count as f64, c.bound])
}

#[wasm_bindgen]
pub fn pair_count(a: f64, l: f64, m1: u32, m2: u32, r: f64, alpha: f64) -> Result<Vec<f64>, JsError> {
    pair_count_values(a, l, m1, m2, r, alpha).map_err(js_err)
}

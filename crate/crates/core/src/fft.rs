//! Padded physical-grid transforms on the torus.
//!
//! Grid points are `x_j = 2πj/M`. Synthesis is `u(x_j) = Σ_k û(k) e^{ikx_j}` and
//! analysis divides by `M`, so coefficients follow `û(k) = (1/2π)∫ u e^{-ikx} dx`.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Smallest power of two strictly larger than `span`.
///
/// A grid of this size resolves every frequency in `-span..=span` without wrap-around.
pub fn grid_len(span: usize) -> usize {
    (span + 1).next_power_of_two().max(4)
}

#[inline]
fn slot(k: i64, m: usize) -> usize {
    k.rem_euclid(m as i64) as usize
}

/// Synthesize grid values from coefficients indexed `-n..=n`.
pub fn synthesize(coeffs: &[Complex64], m: usize) -> Vec<Complex64> {
    let n = (coeffs.len() / 2) as i64;
    debug_assert!(m as i64 > 2 * n);
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for (i, c) in coeffs.iter().enumerate() {
        buf[slot(i as i64 - n, m)] = *c;
    }
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(m).process(&mut buf));
    buf
}

/// Analyze grid values in place and return the coefficients for `-n_out..=n_out`.
pub fn analyze(mut buf: Vec<Complex64>, n_out: usize) -> Vec<Complex64> {
    let m = buf.len();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(m).process(&mut buf));
    let scale = 1.0 / m as f64;
    let n = n_out as i64;
    (-n..=n)
        .map(|k| {
            if (k.unsigned_abs() as usize) < m.div_ceil(2) {
                buf[slot(k, m)] * scale
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect()
}

/// In-place forward transform of an arbitrary-length sequence (no scaling).
pub fn forward_in_place(buf: &mut [Complex64]) {
    let m = buf.len();
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(m).process(buf));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_recovers_coefficients() {
        let coeffs: Vec<Complex64> = (0..9)
            .map(|i| Complex64::new(i as f64 * 0.5 - 1.0, (i * i) as f64 * 0.1))
            .collect();
        let m = grid_len(4 * 4);
        let back = analyze(synthesize(&coeffs, m), 4);
        for (a, b) in coeffs.iter().zip(&back) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn synthesis_of_single_mode_is_plane_wave() {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 7];
        coeffs[3 + 2] = Complex64::new(1.0, 0.0);
        let m = 16;
        let grid = synthesize(&coeffs, m);
        for (j, v) in grid.iter().enumerate() {
            let x = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            assert!((v - Complex64::from_polar(1.0, 2.0 * x)).norm() < 1e-13);
        }
    }
}

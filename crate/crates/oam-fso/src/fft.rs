//! In-place 2D FFT on square row-major buffers, built on rustfft.
//!
//! Both directions are unnormalized (plain DFT sums); callers apply
//! whatever scale their convention needs.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub(crate) struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Fft2 {
            n,
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    #[cfg_attr(not(test), allow(dead_code))]
    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.transform(data, true);
        transpose_square(data, self.n);
    }

    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.transform(data, false);
        transpose_square(data, self.n);
    }

    /// Forward transform leaving the spectrum TRANSPOSED (saves one
    /// transpose per direction). Only valid when the spectral filter
    /// applied in between is symmetric under (kx, ky) swap, in which case
    /// `inverse_t` returns the correctly oriented field.
    pub fn forward_t(&mut self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    pub fn inverse_t(&mut self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    fn transform(&mut self, data: &mut [Complex64], fwd: bool) {
        let n = self.n;
        assert_eq!(data.len(), n * n, "buffer is not n x n");
        let fft = if fwd { &self.forward } else { &self.inverse };
        fft.process_with_scratch(data, &mut self.scratch);
        transpose_square(data, n);
        fft.process_with_scratch(data, &mut self.scratch);
    }
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// FFT bin frequencies in cycles per sample times 2*pi/dx: the angular
/// spatial frequency of row/column `i` on an n-point grid with spacing dx.
pub(crate) fn angular_freq(i: usize, n: usize, dx: f64) -> f64 {
    let f = if i < n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    };
    2.0 * std::f64::consts::PI * f / (n as f64 * dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_parseval() {
        let n = 16;
        let mut data: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let orig = data.clone();
        let power: f64 = orig.iter().map(|c| c.norm_sqr()).sum();

        let mut fft = Fft2::new(n);
        fft.forward(&mut data);
        let spec_power: f64 = data.iter().map(|c| c.norm_sqr()).sum();
        assert!(
            (spec_power - power * (n * n) as f64).abs() < 1e-9 * spec_power,
            "parseval"
        );
        fft.inverse(&mut data);
        let scale = 1.0 / (n * n) as f64;
        for (a, b) in data.iter().zip(orig.iter()) {
            assert!((a * scale - b).norm() < 1e-12);
        }
    }

    #[test]
    fn freq_layout() {
        assert_eq!(angular_freq(0, 8, 1.0), 0.0);
        assert!(angular_freq(1, 8, 1.0) > 0.0);
        assert!(angular_freq(7, 8, 1.0) < 0.0);
        let nyq = angular_freq(4, 8, 1.0);
        assert!((nyq.abs() - std::f64::consts::PI).abs() < 1e-12);
    }
}

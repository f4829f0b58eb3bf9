//! Square 2-D FFT on row-major N×N buffers.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("n", &self.n).finish()
    }
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn run(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(data.len(), n * n, "buffer is not N×N");
        plan.process(data);
        transpose(data, n);
        plan.process(data);
        transpose(data, n);
    }

    /// Unnormalized sum of `x_j e^{-2πi jk/N}` along both axes.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(&self.forward, data);
    }

    /// Unnormalized sum of `x_j e^{+2πi jk/N}` along both axes.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(&self.inverse, data);
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Buffer index of frequency `k` on an N-grid.
pub fn wrap(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Signed frequency stored at buffer index `j`.
pub fn unwrap(j: usize, n: usize) -> i64 {
    if j < n.div_ceil(2) {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_then_inverse_scales_by_n_squared() {
        let n = 8;
        let f = Fft2::new(n);
        let orig: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new(i as f64, (i * i % 7) as f64))
            .collect();
        let mut d = orig.clone();
        f.forward(&mut d);
        f.inverse(&mut d);
        for (a, b) in d.iter().zip(&orig) {
            assert!((a / (n * n) as f64 - b).norm() < 1e-12);
        }
    }

    #[test]
    fn single_mode() {
        let n = 8;
        let f = Fft2::new(n);
        let mut d = vec![Complex64::new(0.0, 0.0); n * n];
        d[wrap(1, n) * n + wrap(-2, n)] = Complex64::new(1.0, 0.0);
        f.inverse(&mut d);
        let th = 2.0 * std::f64::consts::PI / n as f64;
        let (j1, j2) = (3usize, 5usize);
        let e = Complex64::from_polar(1.0, th * (j1 as f64 - 2.0 * j2 as f64));
        assert!((d[j1 * n + j2] - e).norm() < 1e-12);
        assert_eq!(unwrap(7, 8), -1);
        assert_eq!(unwrap(3, 8), 3);
    }
}

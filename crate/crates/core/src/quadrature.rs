//! Gauss–Legendre rules and the numeric check of the norm constant.

use std::f64::consts::PI;

/// Nodes and weights on [-1, 1] by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "need at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Rule mapped to [a, b].
pub fn gauss_legendre_on(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    (
        x.iter().map(|t| c + h * t).collect(),
        w.iter().map(|t| h * t).collect(),
    )
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre_on(a, b, n);
    x.iter().zip(&w).map(|(t, wt)| wt * f(*t)).sum()
}

/// ∫_X^∞ sin²x / x² dx by its asymptotic expansion.
fn sinc2_tail(x: f64) -> f64 {
    1.0 / (2.0 * x) + (2.0 * x).sin() / (4.0 * x * x) - (2.0 * x).cos() / (4.0 * x * x * x)
}

/// ∫∫_{R²} sin²(x₁/2) / |x|³ dx in polar coordinates.
///
/// The radial integral is split into panels of width π/|cos φ| up to
/// |cos φ|·R/2 = 25π, with the remainder taken from the asymptotic tail.
pub fn translation_integral_unit() -> f64 {
    let (rx, rw) = gauss_legendre(20);
    let (ax, aw) = gauss_legendre(24);
    let panels = 50;
    let radial = |c: f64| -> f64 {
        if c == 0.0 {
            return 0.0;
        }
        // x = ρ c / 2, panels of width π/2 in x
        let mut s = 0.0;
        for p in 0..panels {
            let (lo, hi) = (p as f64 * PI / 2.0, (p + 1) as f64 * PI / 2.0);
            let h = 0.5 * (hi - lo);
            let m = 0.5 * (hi + lo);
            for (t, w) in rx.iter().zip(&rw) {
                let x = m + h * t;
                let rho = 2.0 * x / c;
                let sn = (rho * c / 2.0).sin();
                s += w * h * (2.0 / c) * sn * sn / (rho * rho);
            }
        }
        let xmax = panels as f64 * PI / 2.0;
        s + 0.5 * c * sinc2_tail(xmax)
    };
    let pieces = [(0.0, PI / 2.0), (PI / 2.0, 1.5 * PI), (1.5 * PI, 2.0 * PI)];
    let mut total = 0.0;
    for (a, b) in pieces {
        let h = 0.5 * (b - a);
        let m = 0.5 * (a + b);
        for (t, w) in ax.iter().zip(&aw) {
            let phi = m + h * t;
            total += w * h * radial(phi.cos().abs());
        }
    }
    total
}

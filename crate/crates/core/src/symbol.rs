//! Fourier maps and sampled functions on the 2-torus.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fft::{unwrap, wrap, Fft2};
use crate::lattice::{FrequencyPoint, TriangleInstance};

/// Constant of the translation-difference integral, I(m, n) = K·|(m, n)|.
pub const N_NORM_CONSTANT: f64 = PI;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Finitely supported coefficients on Z². Absent keys are exact zeros.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FourierMap {
    entries: BTreeMap<FrequencyPoint, Complex64>,
    /// Set when the map represents a real-valued function.
    pub hermitian: bool,
}

#[derive(Serialize, Deserialize)]
struct CoefficientEntry {
    k: [i64; 2],
    re: f64,
    im: f64,
}

impl Serialize for FourierMap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let list: Vec<CoefficientEntry> = self
            .entries
            .iter()
            .map(|(k, c)| CoefficientEntry {
                k: [k.u, k.v],
                re: c.re,
                im: c.im,
            })
            .collect();
        list.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FourierMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let list = Vec::<CoefficientEntry>::deserialize(d)?;
        let mut m = FourierMap::new(false);
        for e in list {
            m.add(FrequencyPoint::new(e.k[0], e.k[1]), Complex64::new(e.re, e.im));
        }
        m.hermitian = m.hermitian_defect() <= 1e-14;
        Ok(m)
    }
}

impl FourierMap {
    pub fn new(hermitian: bool) -> Self {
        Self {
            entries: BTreeMap::new(),
            hermitian,
        }
    }

    pub fn constant(c: f64) -> Self {
        let mut m = Self::new(true);
        m.insert(FrequencyPoint::ORIGIN, Complex64::new(c, 0.0));
        m
    }

    pub fn from_entries<I>(entries: I, hermitian: bool) -> Self
    where
        I: IntoIterator<Item = (FrequencyPoint, Complex64)>,
    {
        let mut m = Self::new(hermitian);
        for (k, c) in entries {
            m.add(k, c);
        }
        m
    }

    pub fn get(&self, k: FrequencyPoint) -> Complex64 {
        self.entries.get(&k).copied().unwrap_or(ZERO)
    }

    pub fn insert(&mut self, k: FrequencyPoint, c: Complex64) {
        self.entries.insert(k, c);
    }

    pub fn add(&mut self, k: FrequencyPoint, c: Complex64) {
        *self.entries.entry(k).or_insert(ZERO) += c;
    }

    pub fn remove(&mut self, k: FrequencyPoint) -> Option<Complex64> {
        self.entries.remove(&k)
    }

    pub fn iter(&self) -> impl Iterator<Item = (FrequencyPoint, Complex64)> + '_ {
        self.entries.iter().map(|(k, c)| (*k, *c))
    }

    pub fn keys(&self) -> impl Iterator<Item = FrequencyPoint> + '_ {
        self.entries.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest |u| and |v| over the support.
    pub fn max_frequency(&self) -> (i64, i64) {
        self.entries.keys().fold((0, 0), |(a, b), k| {
            (a.max(k.u.abs()), b.max(k.v.abs()))
        })
    }

    /// max |c(−k) − conj c(k)|.
    pub fn hermitian_defect(&self) -> f64 {
        self.iter()
            .map(|(k, c)| (self.get(-k) - c.conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            entries: self.entries.iter().map(|(k, c)| (*k, c * s)).collect(),
            hermitian: self.hermitian && s.im == 0.0,
        }
    }

    /// Σ |c(k)|.
    pub fn total_mass(&self) -> f64 {
        self.entries.values().map(|c| c.norm()).sum()
    }

    /// Σ |c(k)|².
    pub fn l2_norm_sqr(&self) -> f64 {
        self.entries.values().map(|c| c.norm_sqr()).sum()
    }

    /// Drops entries with modulus at most `tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .filter(|(_, c)| c.norm() > tol)
                .map(|(k, c)| (*k, *c))
                .collect(),
            hermitian: self.hermitian,
        }
    }

    pub fn restricted<F: Fn(FrequencyPoint) -> bool>(&self, keep: F) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| keep(**k))
                .map(|(k, c)| (*k, *c))
                .collect(),
            hermitian: false,
        }
    }
}

/// Samples at θ = 2π(j₁, j₂)/N, row-major in j₁.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub n: usize,
    pub values: Vec<Complex64>,
}

impl GridFunction {
    pub fn from_fn<F: Fn(f64, f64) -> Complex64>(n: usize, f: F) -> Self {
        let h = 2.0 * PI / n as f64;
        let mut values = Vec::with_capacity(n * n);
        for j1 in 0..n {
            for j2 in 0..n {
                values.push(f(h * j1 as f64, h * j2 as f64));
            }
        }
        Self { n, values }
    }

    pub fn from_real_fn<F: Fn(f64, f64) -> f64>(n: usize, f: F) -> Self {
        Self::from_fn(n, |a, b| Complex64::new(f(a, b), 0.0))
    }

    pub fn constant(n: usize, c: Complex64) -> Self {
        Self {
            n,
            values: vec![c; n * n],
        }
    }

    pub fn node(&self, idx: usize) -> (f64, f64) {
        let h = 2.0 * PI / self.n as f64;
        ((idx / self.n) as f64 * h, (idx % self.n) as f64 * h)
    }

    pub fn map<F: Fn(Complex64) -> Complex64>(&self, f: F) -> Self {
        Self {
            n: self.n,
            values: self.values.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn zip_with<F: Fn(Complex64, Complex64) -> Complex64>(&self, o: &Self, f: F) -> Self {
        assert_eq!(self.n, o.n, "grid sizes differ");
        Self {
            n: self.n,
            values: self
                .values
                .iter()
                .zip(&o.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn min_re(&self) -> f64 {
        self.values.iter().map(|z| z.re).fold(f64::INFINITY, f64::min)
    }

    pub fn max_re(&self) -> f64 {
        self.values
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn mean(&self) -> Complex64 {
        self.values.iter().sum::<Complex64>() / self.values.len() as f64
    }

    /// Coefficients in FFT buffer order, normalized so that entry 0 is the mean.
    pub fn coefficient_buffer(&self, fft: &Fft2) -> Vec<Complex64> {
        assert_eq!(fft.size(), self.n);
        let mut buf = self.values.clone();
        fft.forward(&mut buf);
        let s = 1.0 / (self.n * self.n) as f64;
        buf.iter_mut().for_each(|z| *z *= s);
        buf
    }
}

/// Places coefficients into an N×N buffer; fails if any frequency aliases.
pub fn coefficient_buffer_of(coeffs: &FourierMap, n: usize) -> Result<Vec<Complex64>> {
    let (mu, mv) = coeffs.max_frequency();
    let worst = mu.max(mv);
    if n as i64 <= 2 * worst {
        return Err(Error::AliasedGrid { n, max_freq: worst });
    }
    let mut buf = vec![ZERO; n * n];
    for (k, c) in coeffs.iter() {
        buf[wrap(k.u, n) * n + wrap(k.v, n)] += c;
    }
    Ok(buf)
}

/// Evaluates a trigonometric polynomial on the N-grid.
pub fn synthesize(coeffs: &FourierMap, n: usize) -> Result<GridFunction> {
    let mut buf = coefficient_buffer_of(coeffs, n)?;
    Fft2::new(n).inverse(&mut buf);
    Ok(GridFunction { n, values: buf })
}

/// Synthesizes from an already placed coefficient buffer.
pub fn synthesize_buffer(mut buf: Vec<Complex64>, fft: &Fft2) -> GridFunction {
    fft.inverse(&mut buf);
    GridFunction {
        n: fft.size(),
        values: buf,
    }
}

/// Fourier coefficients with |u|, |v| <= `box_m`, normalized by the Haar mean.
pub fn analyze(g: &GridFunction, box_m: usize) -> Result<FourierMap> {
    analyze_with(g, box_m, &Fft2::new(g.n))
}

pub fn analyze_with(g: &GridFunction, box_m: usize, fft: &Fft2) -> Result<FourierMap> {
    let n = g.n;
    if 2 * box_m >= n {
        return Err(Error::AliasedGrid {
            n,
            max_freq: box_m as i64,
        });
    }
    let buf = g.coefficient_buffer(fft);
    Ok(buffer_to_map(&buf, n, box_m))
}

pub fn buffer_to_map(buf: &[Complex64], n: usize, box_m: usize) -> FourierMap {
    let m = box_m as i64;
    let mut out = FourierMap::new(false);
    for u in -m..=m {
        for v in -m..=m {
            out.insert(FrequencyPoint::new(u, v), buf[wrap(u, n) * n + wrap(v, n)]);
        }
    }
    out.hermitian = out.hermitian_defect() <= 1e-12;
    out
}

/// Every buffer entry except the Nyquist rows, as a map.
pub fn buffer_to_full_map(buf: &[Complex64], n: usize) -> FourierMap {
    let mut out = FourierMap::new(false);
    for j1 in 0..n {
        for j2 in 0..n {
            let (u, v) = (unwrap(j1, n), unwrap(j2, n));
            if 2 * u.abs() >= n as i64 || 2 * v.abs() >= n as i64 {
                continue;
            }
            out.insert(FrequencyPoint::new(u, v), buf[j1 * n + j2]);
        }
    }
    out
}

fn check_positive(g: &GridFunction, eps: f64) -> Result<()> {
    let min = g.min_re();
    if !(min > eps) {
        return Err(Error::NonPositiveSymbol { min });
    }
    Ok(())
}

/// Elementwise natural log of a positive real symbol.
pub fn pointwise_log(g: &GridFunction, eps_pos: f64) -> Result<GridFunction> {
    check_positive(g, eps_pos)?;
    Ok(g.map(|z| Complex64::new(z.re.ln(), 0.0)))
}

/// Elementwise reciprocal of a positive real symbol.
pub fn pointwise_reciprocal(g: &GridFunction, eps_pos: f64) -> Result<GridFunction> {
    check_positive(g, eps_pos)?;
    Ok(g.map(|z| Complex64::new(1.0 / z.re, 0.0)))
}

/// Weighted norm Σ (s1|u| + s2|v|)|c|² with the weights of the triangle.
pub fn k_norm(m: &FourierMap, t: &TriangleInstance) -> f64 {
    m.iter()
        .map(|(k, c)| (t.s1 * k.u.abs() as f64 + t.s2 * k.v.abs() as f64) * c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Norm K·Σ |k| |c|² built from the translation-difference integral.
pub fn n_norm(m: &FourierMap) -> f64 {
    (N_NORM_CONSTANT
        * m.iter()
            .map(|(k, c)| (k.u as f64).hypot(k.v as f64) * c.norm_sqr())
            .sum::<f64>())
    .sqrt()
}

/// Bounds (c1, c2) with c1·k² <= n² <= c2·k² for maps supported in the box.
pub fn norm_equivalence_bounds(t: &TriangleInstance, box_m: i64) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for u in -box_m..=box_m {
        for v in -box_m..=box_m {
            if u == 0 && v == 0 {
                continue;
            }
            let r = N_NORM_CONSTANT * (u as f64).hypot(v as f64)
                / (t.s1 * u.abs() as f64 + t.s2 * v.abs() as f64);
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (lo, hi)
}

/// Zeroth coefficient as a real number.
pub fn mean(m: &FourierMap) -> Result<f64> {
    let c = m.get(FrequencyPoint::ORIGIN);
    if c.im.abs() > 1e-12 {
        return Err(Error::NonRealMean(c.im));
    }
    Ok(c.re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn running() -> FourierMap {
        FourierMap::from_entries(
            [
                (FrequencyPoint::new(0, 0), c(1.25)),
                (FrequencyPoint::new(1, 0), c(-0.5)),
                (FrequencyPoint::new(-1, 0), c(-0.5)),
            ],
            true,
        )
    }

    #[test]
    fn synthesize_running_symbol() {
        let g = synthesize(&running(), 8).unwrap();
        assert!((g.values[0].re - 0.25).abs() < 1e-14);
        let (t1, _) = g.node(3 * 8 + 5);
        assert!((g.values[3 * 8 + 5].re - (1.25 - t1.cos())).abs() < 1e-13);
        let k = synthesize(&FourierMap::constant(2.5), 4).unwrap();
        assert!(k.values.iter().all(|z| (z - c(2.5)).norm() < 1e-15));
        assert!(matches!(
            synthesize(&running(), 2),
            Err(Error::AliasedGrid { .. })
        ));
    }

    #[test]
    fn analyze_running_symbol_and_reciprocal() {
        let g = GridFunction::from_real_fn(64, |a, _| 1.25 - a.cos());
        let m = analyze(&g, 20).unwrap();
        assert!((m.get(FrequencyPoint::new(0, 0)) - c(1.25)).norm() < 1e-14);
        assert!((m.get(FrequencyPoint::new(-1, 0)) - c(-0.5)).norm() < 1e-14);
        assert!((m.get(FrequencyPoint::new(2, 1))).norm() < 1e-14);
        let r = pointwise_reciprocal(&g, 1e-10).unwrap();
        let rm = analyze(&r, 20).unwrap();
        for k in -20i64..=20 {
            let want = 4.0 / 3.0 * 0.5f64.powi(k.abs() as i32);
            assert!((rm.get(FrequencyPoint::new(k, 0)).re - want).abs() < 1e-10);
        }
        assert!(rm.hermitian);
    }

    #[test]
    fn log_of_running_symbol() {
        let g = GridFunction::from_real_fn(128, |a, _| 1.25 - a.cos());
        let l = analyze(&pointwise_log(&g, 1e-10).unwrap(), 30).unwrap();
        assert!(mean(&l).unwrap().abs() < 1e-14);
        for k in 1i64..=30 {
            let want = -(0.5f64.powi(k as i32)) / k as f64;
            assert!((l.get(FrequencyPoint::new(k, 0)).re - want).abs() < 1e-13);
            assert!((l.get(FrequencyPoint::new(-k, 0)).re - want).abs() < 1e-13);
        }
        let z = GridFunction::constant(4, c(1.0));
        assert!(pointwise_log(&z, 1e-10)
            .unwrap()
            .values
            .iter()
            .all(|v| v.norm() == 0.0));
        let bad = GridFunction::constant(4, c(-1.0));
        assert!(matches!(
            pointwise_log(&bad, 1e-10),
            Err(Error::NonPositiveSymbol { .. })
        ));
    }

    #[test]
    fn norms() {
        let t = TriangleInstance::new(
            crate::lattice::PrimitiveVector::new(-1, 1).unwrap(),
            2,
            1,
        )
        .unwrap();
        assert_eq!(k_norm(&FourierMap::constant(3.0), &t), 0.0);
        assert_eq!(n_norm(&FourierMap::constant(3.0)), 0.0);
        let mut l = FourierMap::new(true);
        for k in 1i64..=60 {
            let v = c(-(0.5f64.powi(k as i32)) / k as f64);
            l.insert(FrequencyPoint::new(k, 0), v);
            l.insert(FrequencyPoint::new(-k, 0), v);
        }
        let want = (2.0 * (4.0f64 / 3.0).ln()).sqrt();
        assert!((k_norm(&l, &t) - want).abs() < 1e-12);
        assert!((k_norm(&l.scaled(c(2.0)), &t) - 2.0 * want).abs() < 1e-12);
        let two = FourierMap::from_entries(
            [
                (FrequencyPoint::new(1, 0), c(1.0)),
                (FrequencyPoint::new(-1, 0), c(1.0)),
            ],
            true,
        );
        assert!((n_norm(&two).powi(2) - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let m = running();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"k\":[-1,0]"));
        let back: FourierMap = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn mean_rejects_complex() {
        let m = FourierMap::from_entries([(FrequencyPoint::ORIGIN, Complex64::new(1.0, 1e-6))], false);
        assert!(matches!(mean(&m), Err(Error::NonRealMean(_))));
        assert_eq!(mean(&FourierMap::constant(4.0 / 3.0)).unwrap(), 4.0 / 3.0);
    }
}

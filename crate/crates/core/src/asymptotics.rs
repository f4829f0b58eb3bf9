//! Asymptotic coefficients of the trace of the inverse and of the
//! log-determinant on scaled triangles, with the identities linking them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::FactorizationResult;
use crate::fft::{unwrap, Fft2};
use crate::lattice::{FrequencyPoint, TriangleInstance};
use crate::par;
use crate::quadrature::gauss_legendre_on;
use crate::symbol::{
    analyze_with, mean, pointwise_log, pointwise_reciprocal, synthesize, FourierMap, GridFunction,
};
use crate::toeplitz::{assemble_toeplitz, cholesky_logdet, trace_of_inverse};

const IMAG_TOL: f64 = 1e-10;
const EPS_POS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticCoefficients {
    pub c1: f64,
    pub c2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mean_recip: f64,
    pub mean_log: f64,
    /// Σ u|β|² over the cone, β the coefficients of 1/α.
    pub beta_moment_u: f64,
    pub beta_moment_v: f64,
}

/// Coefficients of 1/f and ln f on the largest alias-free box of the grid.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub recip: FourierMap,
    pub log: FourierMap,
}

impl SpectralData {
    pub fn of(f: &GridFunction) -> Result<Self> {
        let fft = Fft2::new(f.n);
        let box_m = f.n / 2 - 1;
        Ok(Self {
            recip: analyze_with(&pointwise_reciprocal(f, EPS_POS)?, box_m, &fft)?,
            log: analyze_with(&pointwise_log(f, EPS_POS)?, box_m, &fft)?,
        })
    }
}

fn real_part(z: Complex64) -> Result<f64> {
    if z.im.abs() > IMAG_TOL {
        return Err(Error::NonNegligibleImaginaryPart(z.im));
    }
    Ok(z.re)
}

/// c₁ = Σ|u|·(ln 1/f)ˆ·conj((1/f)ˆ) and c₂ with |v|; `log_f` holds ln f.
pub fn trace_coefficients(recip: &FourierMap, log_f: &FourierMap) -> Result<(f64, f64)> {
    let (mut c1, mut c2) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    for (k, r) in recip.iter() {
        let term = -log_f.get(k) * r.conj();
        c1 += k.u.abs() as f64 * term;
        c2 += k.v.abs() as f64 * term;
    }
    Ok((real_part(c1)?, real_part(c2)?))
}

/// μ₁ = −½Σ|u||(ln f)ˆ|² and μ₂ with |v|.
pub fn det_coefficients(log_f: &FourierMap) -> (f64, f64) {
    let (mut m1, mut m2) = (0.0, 0.0);
    for (k, c) in log_f.iter() {
        m1 += k.u.abs() as f64 * c.norm_sqr();
        m2 += k.v.abs() as f64 * c.norm_sqr();
    }
    (-0.5 * m1, -0.5 * m2)
}

/// (Σ u|β|², Σ v|β|²) over the cone, from 1/α on grid `n`.
pub fn beta_moments(fact: &FactorizationResult, n: usize) -> Result<(f64, f64)> {
    let alpha = fact.alpha_on_grid(n)?;
    let inv = alpha.map(|a| 1.0 / a);
    let buf = inv.coefficient_buffer(&Fft2::new(n));
    let (mut mu, mut mv) = (0.0, 0.0);
    for (idx, b) in buf.iter().enumerate() {
        let k = FrequencyPoint::new(unwrap(idx / n, n), unwrap(idx % n, n));
        if fact.cone.contains(k) {
            mu += k.u as f64 * b.norm_sqr();
            mv += k.v as f64 * b.norm_sqr();
        }
    }
    Ok((mu, mv))
}

impl AsymptoticCoefficients {
    /// All coefficients; the β moments come from the factorization.
    pub fn compute(f: &GridFunction, fact: &FactorizationResult) -> Result<Self> {
        let mut c = Self::from_symbol(f)?;
        let (bu, bv) = beta_moments(fact, f.n.max(fact.grid_n))?;
        c.beta_moment_u = bu;
        c.beta_moment_v = bv;
        Ok(c)
    }

    /// Without a factorization the β moments are taken as c/2.
    pub fn from_symbol(f: &GridFunction) -> Result<Self> {
        let s = SpectralData::of(f)?;
        let (c1, c2) = trace_coefficients(&s.recip, &s.log)?;
        let (mu1, mu2) = det_coefficients(&s.log);
        Ok(Self {
            c1,
            c2,
            mu1,
            mu2,
            mean_recip: mean(&s.recip)?,
            mean_log: mean(&s.log)?,
            beta_moment_u: 0.5 * c1,
            beta_moment_v: 0.5 * c2,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentIdentityReport {
    pub lhs_u: f64,
    pub rhs_u: f64,
    pub gap_u: f64,
    pub lhs_v: f64,
    pub rhs_v: f64,
    pub gap_v: f64,
}

impl MomentIdentityReport {
    pub fn max_gap(&self) -> f64 {
        self.gap_u.max(self.gap_v)
    }
}

/// β moments against ½Σ|u|(ln 1/f)ˆ conj((1/f)ˆ) and the |v| analogue.
pub fn beta_moment_check(
    fact: &FactorizationResult,
    recip: &FourierMap,
    log_recip: &FourierMap,
) -> Result<MomentIdentityReport> {
    fact.ensure_exact()?;
    let (lhs_u, lhs_v) = beta_moments(fact, fact.grid_n)?;
    let (c1, c2) = trace_coefficients(recip, &log_recip.scaled(Complex64::new(-1.0, 0.0)))?;
    let (rhs_u, rhs_v) = (0.5 * c1, 0.5 * c2);
    Ok(MomentIdentityReport {
        lhs_u,
        rhs_u,
        gap_u: (lhs_u - rhs_u).abs(),
        lhs_v,
        rhs_v,
        gap_v: (lhs_v - rhs_v).abs(),
    })
}

/// |Λ|·∫1/f − 2(𝔖₁(λ)·Σu|β|² + 𝔖₂(λ)·Σv|β|²).
pub fn predict_trace(c: &AsymptoticCoefficients, t: &TriangleInstance) -> f64 {
    t.n_points as f64 * c.mean_recip
        - 2.0 * (t.s1_at_lambda() * c.beta_moment_u + t.s2_at_lambda() * c.beta_moment_v)
}

/// The same expansion with the correction written as +λ(𝔖₁c₁ + 𝔖₂c₂).
pub fn predict_trace_displayed(c: &AsymptoticCoefficients, t: &TriangleInstance) -> f64 {
    t.n_points as f64 * c.mean_recip + t.s1_at_lambda() * c.c1 + t.s2_at_lambda() * c.c2
}

/// |Λ|·∫ln f − λ(𝔖₁μ₁ + 𝔖₂μ₂).
pub fn predict_logdet(c: &AsymptoticCoefficients, t: &TriangleInstance) -> f64 {
    t.n_points as f64 * c.mean_log - (t.s1_at_lambda() * c.mu1 + t.s2_at_lambda() * c.mu2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegralIdentityReport {
    pub lambda: u32,
    pub nodes: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

fn one_minus(h: &FourierMap, t: f64) -> FourierMap {
    let mut f = h.scaled(Complex64::new(-t, 0.0));
    f.add(FrequencyPoint::ORIGIN, Complex64::new(1.0, 0.0));
    f.hermitian = h.hermitian;
    f
}

fn grid_mean(g: &GridFunction) -> f64 {
    g.mean().re
}

/// ln det T(1−h) − trace T(ln(1−h)) against
/// −∫₀¹ (1/t)[trace T(1−th)⁻¹ − |Λ|·∫1/(1−th)] dt by Gauss–Legendre.
pub fn det_integral_identity_check(
    h: &FourierMap,
    t: &TriangleInstance,
    nodes: usize,
    grid_n: usize,
) -> Result<IntegralIdentityReport> {
    let hg = synthesize(h, grid_n)?;
    let sup = hg.max_abs();
    if sup >= 1.0 {
        return Err(Error::SymbolNotContraction(sup));
    }
    let n_pts = t.n_points as f64;
    let f = one_minus(h, 1.0);
    let fg = hg.map(|z| 1.0 - z);
    let lhs = cholesky_logdet(&assemble_toeplitz(&f, t))?
        - n_pts * grid_mean(&pointwise_log(&fg, EPS_POS)?);
    let (x, w) = gauss_legendre_on(0.0, 1.0, nodes);
    let vals: Vec<Result<f64>> = par::map_range(nodes, |i| {
        let s = x[i];
        let tr = trace_of_inverse(&assemble_toeplitz(&one_minus(h, s), t))?;
        let ft = hg.map(|z| 1.0 - s * z);
        let m = grid_mean(&pointwise_reciprocal(&ft, EPS_POS)?);
        Ok(w[i] * (tr - n_pts * m) / s)
    });
    let mut rhs = 0.0;
    for v in vals {
        rhs -= v?;
    }
    Ok(IntegralIdentityReport {
        lambda: t.lambda,
        nodes,
        lhs,
        rhs,
        gap: (lhs - rhs).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomotopyReport {
    pub nodes: usize,
    /// ∫₀¹ (𝔖₁c₁(f_t) + 𝔖₂c₂(f_t))/t dt.
    pub integral: f64,
    /// 𝔖₁μ₁(f) + 𝔖₂μ₂(f).
    pub target: f64,
    pub gap: f64,
    /// |integral + target|, the gap with the opposite orientation.
    pub opposite_sign_gap: f64,
}

/// Quadrature of the c-coefficients along f_t = 1 − t(1 − f).
pub fn homotopy_integral(
    f: &GridFunction,
    t: &TriangleInstance,
    nodes: usize,
) -> Result<HomotopyReport> {
    let (x, w) = gauss_legendre_on(0.0, 1.0, nodes);
    let vals: Vec<Result<f64>> = par::map_range(nodes, |i| {
        let s = x[i];
        let ft = f.map(|z| 1.0 - s * (1.0 - z));
        let sd = SpectralData::of(&ft)?;
        let (c1, c2) = trace_coefficients(&sd.recip, &sd.log)?;
        Ok(w[i] * (t.s1 * c1 + t.s2 * c2) / s)
    });
    let mut integral = 0.0;
    for v in vals {
        integral += v?;
    }
    let sd = SpectralData::of(f)?;
    let (mu1, mu2) = det_coefficients(&sd.log);
    let target = t.s1 * mu1 + t.s2 * mu2;
    Ok(HomotopyReport {
        nodes,
        integral,
        target,
        gap: (integral - target).abs(),
        opposite_sign_gap: (integral + target).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::{cone_factorize, FactorizationOptions};
    use crate::lattice::{ConeSpec, PrimitiveVector};

    fn running_grid(n: usize) -> GridFunction {
        GridFunction::from_real_fn(n, |a, _| 1.25 - a.cos())
    }

    fn tri(lambda: u32) -> TriangleInstance {
        TriangleInstance::new(PrimitiveVector::new(-1, 1).unwrap(), 2, lambda).unwrap()
    }

    fn cone() -> ConeSpec {
        ConeSpec::from_points(FrequencyPoint::new(1, 0), FrequencyPoint::new(1, 1)).unwrap()
    }

    #[test]
    fn running_symbol_closed_forms() {
        let g = running_grid(128);
        let fact = cone_factorize(&g, &cone(), &FactorizationOptions { grid_n: 128, box_m: 40, ..Default::default() }).unwrap();
        let c = AsymptoticCoefficients::compute(&g, &fact).unwrap();
        // partial sums to k = 60
        let c1: f64 = (1..=60).map(|k| 2.0 * (4.0 / 3.0) * 0.25f64.powi(k)).sum();
        let mu1: f64 = -(1..=60).map(|k| 0.25f64.powi(k) / k as f64).sum::<f64>();
        let mom: f64 = (1..=60).map(|k| k as f64 * 0.25f64.powi(k)).sum();
        assert!((c.c1 - c1).abs() < 1e-12 && c.c2.abs() < 1e-12);
        assert!((c.mu1 - mu1).abs() < 1e-12 && c.mu2.abs() < 1e-14);
        assert!((c.beta_moment_u - mom).abs() < 1e-12);
        assert!((mom - 4.0 / 9.0).abs() < 1e-14);
        assert!(c.mean_log.abs() < 1e-14);
        assert!((c.mean_recip - 4.0 / 3.0).abs() < 1e-13);
        let t = tri(1);
        assert!((predict_trace(&c, &t) - (16.0 / 3.0 - 8.0 / 9.0)).abs() < 1e-11);
        assert!((predict_logdet(&c, &t) - (4.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((predict_trace_displayed(&c, &t) - (16.0 / 3.0 + 8.0 / 9.0)).abs() < 1e-11);
    }

    #[test]
    fn constant_symbol_has_no_correction() {
        let g = GridFunction::from_real_fn(32, |_, _| 2.0);
        let c = AsymptoticCoefficients::from_symbol(&g).unwrap();
        assert_eq!((c.c1, c.c2, c.mu1, c.mu2), (0.0, 0.0, 0.0, 0.0));
        let t = tri(3);
        assert!((predict_trace(&c, &t) - 8.0).abs() < 1e-13);
        assert!((predict_logdet(&c, &t) - 16.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn exponential_scaling_leaves_mu_unchanged() {
        let g = running_grid(64);
        let c = AsymptoticCoefficients::from_symbol(&g).unwrap();
        let d = AsymptoticCoefficients::from_symbol(&g.map(|z| z * 3f64.exp())).unwrap();
        assert!((c.mu1 - d.mu1).abs() < 1e-14 && (c.mu2 - d.mu2).abs() < 1e-14);
    }

    #[test]
    fn swap_symmetric_symbol_has_equal_coefficients() {
        let g = GridFunction::from_real_fn(64, |a, b| 3.0 - a.cos() - b.cos() + 0.3 * (a + b).cos());
        let c = AsymptoticCoefficients::from_symbol(&g).unwrap();
        assert!((c.c1 - c.c2).abs() < 1e-13);
        assert!((c.mu1 - c.mu2).abs() < 1e-13);
    }

    #[test]
    fn moment_identity_for_two_variable_factor() {
        // α = 1 − ½χ₁ − ⅓χ₁χ₂
        let alpha = |a: f64, b: f64| {
            Complex64::new(1.0, 0.0) - 0.5 * Complex64::from_polar(1.0, a)
                - Complex64::from_polar(1.0 / 3.0, a + b)
        };
        let g = GridFunction::from_real_fn(256, |a, b| alpha(a, b).norm_sqr());
        let fact = cone_factorize(&g, &cone(), &FactorizationOptions::default()).unwrap();
        let sd = SpectralData::of(&g).unwrap();
        let log_recip = sd.log.scaled(Complex64::new(-1.0, 0.0));
        let rep = beta_moment_check(&fact, &sd.recip, &log_recip).unwrap();
        assert!(rep.max_gap() < 1e-7, "{rep:?}");
        // brute-force 1/α = Σ_n (½χ₁ + ⅓χ₁χ₂)^n; depth 40 leaves a 4e-6 tail, 80 does not
        let mut beta = std::collections::BTreeMap::<(i64, i64), f64>::new();
        let mut layer = std::collections::BTreeMap::from([((0i64, 0i64), 1.0f64)]);
        for _ in 0..=80 {
            let mut next = std::collections::BTreeMap::new();
            for (&(u, v), &c) in &layer {
                *beta.entry((u, v)).or_insert(0.0) += c;
                *next.entry((u + 1, v)).or_insert(0.0) += 0.5 * c;
                *next.entry((u + 1, v + 1)).or_insert(0.0) += c / 3.0;
            }
            layer = next;
        }
        let bu: f64 = beta.iter().map(|(&(u, _), c)| u as f64 * c * c).sum();
        let bv: f64 = beta.iter().map(|(&(_, v), c)| v as f64 * c * c).sum();
        assert!((rep.lhs_u - bu).abs() < 1e-7 && (rep.lhs_v - bv).abs() < 1e-7, "{rep:?} {bu} {bv}");
    }

    #[test]
    fn trace_is_below_volume_term() {
        let g = running_grid(64);
        let c = AsymptoticCoefficients::from_symbol(&g).unwrap();
        let f = crate::symbol::analyze(&g, 8).unwrap().pruned(1e-14);
        for lambda in [4, 6] {
            let t = tri(lambda);
            let tr = trace_of_inverse(&assemble_toeplitz(&f, &t)).unwrap();
            assert!(tr <= t.n_points as f64 * c.mean_recip);
        }
    }

    #[test]
    fn integral_identity_small_triangles() {
        let h = FourierMap::from_entries(
            [
                (FrequencyPoint::new(1, 0), Complex64::new(0.25, 0.0)),
                (FrequencyPoint::new(-1, 0), Complex64::new(0.25, 0.0)),
            ],
            true,
        );
        for lambda in 1..=2 {
            let r = det_integral_identity_check(&h, &tri(lambda), 32, 64).unwrap();
            assert!(r.gap < 1e-6, "{r:?}");
        }
        let zero = FourierMap::new(true);
        let r = det_integral_identity_check(&zero, &tri(1), 8, 16).unwrap();
        assert!(r.lhs.abs() < 1e-14 && r.rhs.abs() < 1e-14);
        let big = h.scaled(Complex64::new(4.0, 0.0));
        assert!(matches!(
            det_integral_identity_check(&big, &tri(1), 8, 16),
            Err(Error::SymbolNotContraction(_))
        ));
    }

    #[test]
    fn homotopy_orientation() {
        let r = homotopy_integral(&running_grid(128), &tri(1), 48).unwrap();
        assert!((r.target + (4.0f64 / 3.0).ln()).abs() < 1e-12);
        // the integral equals −(𝔖₁μ₁ + 𝔖₂μ₂)
        assert!(r.opposite_sign_gap < 1e-6, "{r:?}");
        assert!((r.gap - 2.0 * (4.0f64 / 3.0).ln()).abs() < 1e-6);
    }
}

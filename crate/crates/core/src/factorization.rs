//! Cone factorization f = α·ᾱ with the spectrum of α in a half-cone.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{unwrap, wrap, Fft2};
use crate::lattice::{
    apply_matrix, find_unimodular_subcone, matrix_det, minimal_split, shift_vector, vertex_cone,
    ConeSpec, FrequencyPoint, TriangleInstance,
};
use crate::par;
use crate::symbol::{analyze_with, coefficient_buffer_of, pointwise_log, FourierMap, GridFunction};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationOptions {
    pub grid_n: usize,
    pub box_m: usize,
    pub r_sequence: Vec<f64>,
    pub tol_spec: f64,
    pub tol_fact: f64,
    pub eps_pos: f64,
    /// Coefficients of ln f at or below this modulus are left out of the
    /// support used to build the shift vector.
    pub support_tol: f64,
}

impl Default for FactorizationOptions {
    fn default() -> Self {
        Self {
            grid_n: 256,
            box_m: 64,
            r_sequence: vec![0.9, 0.99, 0.999],
            tol_spec: 1e-10,
            tol_fact: 1e-8,
            eps_pos: 1e-10,
            support_tol: 1e-12,
        }
    }
}

/// One aggregated line `key + Z·v` of the log-symbol support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSum {
    pub key: FrequencyPoint,
    pub re: f64,
    pub im: f64,
}

impl LineSum {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// Coefficients moved onto the subgroup measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularTransfer {
    pub v: FrequencyPoint,
    /// Line sums at the support points outside C⁺ ∪ (−C⁺).
    pub transferred: FourierMap,
    /// Only the lines that meet the outside of the double cone.
    pub line_sums: Vec<LineSum>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusResidual {
    pub r: f64,
    /// Grid L² residual of |α_r|² − f away from the subgroup.
    pub l2_off_subgroup: f64,
    pub nodes_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularReport {
    pub transfer: SingularTransfer,
    pub residuals: Vec<RadiusResidual>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationResult {
    pub alpha_coeffs: FourierMap,
    pub beta_coeffs: FourierMap,
    pub cone: ConeSpec,
    /// Unimodular sub-cone used for the change of basis.
    pub basis_cone: ConeSpec,
    pub residual_sup: f64,
    pub residual_l2: f64,
    pub leak_alpha: f64,
    pub leak_beta: f64,
    pub radius_r: f64,
    pub grid_n: usize,
    pub box_m: usize,
    /// Coefficients of ln α on the exact path.
    pub log_alpha_coeffs: Option<FourierMap>,
    pub singular: Option<SingularReport>,
}

impl FactorizationResult {
    pub fn is_exact(&self) -> bool {
        self.singular.is_none()
    }

    pub fn ensure_exact(&self) -> Result<()> {
        if self.is_exact() {
            Ok(())
        } else {
            Err(Error::ConeTooNarrowForExactPath)
        }
    }

    /// α sampled on an N-grid from the stored log coefficients.
    pub fn alpha_on_grid(&self, n: usize) -> Result<GridFunction> {
        let log = self
            .log_alpha_coeffs
            .as_ref()
            .ok_or(Error::SingularPathUnsupported)?;
        let fft = Fft2::new(n);
        let mut buf = coefficient_buffer_of(log, n)?;
        fft.inverse(&mut buf);
        Ok(GridFunction {
            n,
            values: buf.into_iter().map(|z| z.exp()).collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorizationDiagnostics {
    pub residual_sup: f64,
    pub residual_l2: f64,
    pub leak_alpha: f64,
    pub leak_beta: f64,
}

/// Relabels frequencies: the entry at `U·k` is the input entry at `k`.
pub fn torus_automorphism_remap(m: &FourierMap, u: &[[i64; 2]; 2]) -> Result<FourierMap> {
    let d = matrix_det(u);
    if d.abs() != 1 {
        return Err(Error::NotUnimodular(d));
    }
    let mut out = FourierMap::new(m.hermitian);
    for (k, c) in m.iter() {
        out.insert(apply_matrix(u, k), c);
    }
    Ok(out)
}

fn line_key(a: FrequencyPoint, v: FrequencyPoint) -> FrequencyPoint {
    let j = a.dot(v).div_euclid(v.dot(v)) as i64;
    a - j * v
}

/// Groups the support into lines `a + Z·v` and records the line sums seen
/// from the support points outside C⁺ ∪ (−C⁺).
pub fn line_sum_transfer(
    h_coeffs: &FourierMap,
    v: FrequencyPoint,
    cone: &ConeSpec,
) -> SingularTransfer {
    let mut sums: BTreeMap<FrequencyPoint, Complex64> = BTreeMap::new();
    let mut outside = Vec::new();
    for (k, c) in h_coeffs.iter() {
        *sums.entry(line_key(k, v)).or_insert(ZERO) += c;
        if !cone.in_double_cone(k) {
            outside.push(k);
        }
    }
    let mut transferred = FourierMap::new(false);
    let mut line_sums = BTreeMap::new();
    for a in outside {
        let key = line_key(a, v);
        let s = sums[&key];
        transferred.insert(a, s);
        line_sums.insert(key, s);
    }
    transferred.hermitian = transferred.hermitian_defect() <= 1e-14;
    SingularTransfer {
        v,
        transferred,
        line_sums: line_sums
            .into_iter()
            .map(|(key, s)| LineSum {
                key,
                re: s.re,
                im: s.im,
            })
            .collect(),
    }
}

/// Distance from θ to the subgroup {θ : ⟨v, θ⟩ ∈ 2πZ}.
fn distance_to_subgroup(theta: (f64, f64), v: FrequencyPoint) -> f64 {
    let g = v.gcd() as f64;
    let w = v.primitive();
    let period = 2.0 * PI / g;
    let s = w.u as f64 * theta.0 + w.v as f64 * theta.1;
    let r = s - period * (s / period).round();
    r.abs() / w.norm()
}

fn in_first_quadrant(k: FrequencyPoint) -> bool {
    k.u >= 0 && k.v >= 0
}

/// Log coefficients in FFT buffer order together with their frequencies.
struct LogSpectrum {
    n: usize,
    coeffs: Vec<Complex64>,
}

impl LogSpectrum {
    fn frequency(&self, idx: usize) -> Option<FrequencyPoint> {
        let n = self.n;
        let (u, v) = (unwrap(idx / n, n), unwrap(idx % n, n));
        // Nyquist rows have no symmetric partner and are left out
        if 2 * u.abs() >= n as i64 || 2 * v.abs() >= n as i64 {
            None
        } else {
            Some(FrequencyPoint::new(u, v))
        }
    }
}

/// Factorizes a positive sampled symbol along `cone`.
pub fn cone_factorize(
    f: &GridFunction,
    cone: &ConeSpec,
    opts: &FactorizationOptions,
) -> Result<FactorizationResult> {
    let n = f.n;
    let fft = Fft2::new(n);
    let h = pointwise_log(f, opts.eps_pos)?;
    let spec = LogSpectrum {
        n,
        coeffs: h.coefficient_buffer(&fft),
    };
    let basis = find_unimodular_subcone(cone)?;
    let to_basis = basis.coordinate_matrix()?;

    let mut outside_mass = 0.0;
    for (idx, c) in spec.coeffs.iter().enumerate() {
        if let Some(k) = spec.frequency(idx) {
            let kb = apply_matrix(&to_basis, k);
            if kb.u.signum() * kb.v.signum() < 0 {
                outside_mass += c.norm();
            }
        }
    }

    let mut log_alpha_coeffs = None;
    let (log_alpha, singular, radius_r) = if outside_mass <= opts.tol_spec {
        let mut buf = vec![ZERO; n * n];
        for (idx, c) in spec.coeffs.iter().enumerate() {
            let Some(k) = spec.frequency(idx) else { continue };
            let kb = apply_matrix(&to_basis, k);
            if k.is_zero() {
                buf[idx] = 0.5 * c;
            } else if in_first_quadrant(kb) {
                buf[idx] = *c;
            }
        }
        log_alpha_coeffs = Some(crate::symbol::buffer_to_full_map(&buf, n).pruned(0.0));
        fft.inverse(&mut buf);
        (buf, None, 1.0)
    } else {
        singular_path(f, &spec, &basis, &to_basis, &fft, opts)?
    };

    let alpha = GridFunction {
        n,
        values: log_alpha.iter().map(|z| z.exp()).collect(),
    };
    let inv_alpha = alpha.map(|z| 1.0 / z);
    let alpha_coeffs = analyze_with(&alpha, opts.box_m, &fft)?;
    let beta_coeffs = analyze_with(&inv_alpha, opts.box_m, &fft)?;
    let (residual_sup, residual_l2) = residuals(f, &alpha);
    let leak = |m: &FourierMap| -> f64 {
        m.iter()
            .filter(|(k, _)| !cone.contains(*k))
            .map(|(_, c)| c.norm())
            .sum()
    };
    let (leak_alpha, leak_beta) = (leak(&alpha_coeffs), leak(&beta_coeffs));
    Ok(FactorizationResult {
        alpha_coeffs: alpha_coeffs.pruned(0.0),
        beta_coeffs: beta_coeffs.pruned(0.0),
        cone: *cone,
        basis_cone: basis,
        residual_sup,
        residual_l2,
        leak_alpha,
        leak_beta,
        radius_r,
        grid_n: n,
        box_m: opts.box_m,
        log_alpha_coeffs,
        singular,
    })
}

fn residuals(f: &GridFunction, alpha: &GridFunction) -> (f64, f64) {
    let mut sup = 0.0f64;
    let mut l2 = 0.0;
    for (fv, a) in f.values.iter().zip(&alpha.values) {
        let d = (fv.re - a.norm_sqr()).abs();
        sup = sup.max(d);
        l2 += d * d;
    }
    (sup, (l2 / f.values.len() as f64).sqrt())
}

type PathOutput = (Vec<Complex64>, Option<SingularReport>, f64);

fn singular_path(
    f: &GridFunction,
    spec: &LogSpectrum,
    basis: &ConeSpec,
    to_basis: &[[i64; 2]; 2],
    fft: &Fft2,
    opts: &FactorizationOptions,
) -> Result<PathOutput> {
    let n = spec.n;
    let mut support = FourierMap::new(true);
    for (idx, c) in spec.coeffs.iter().enumerate() {
        if let Some(k) = spec.frequency(idx) {
            if c.norm() > opts.support_tol {
                support.insert(k, *c);
            }
        }
    }
    let pts: Vec<FrequencyPoint> = support.keys().collect();
    let v = shift_vector(basis, &pts)?;
    let transfer = line_sum_transfer(&support, v, basis);
    let vb = apply_matrix(to_basis, v);
    let v_weight = (vb.u + vb.v) as i32;

    // per-line start index j0 and weight exponent of the first term
    let mut lines = Vec::new();
    for ls in &transfer.line_sums {
        let kb = apply_matrix(to_basis, ls.key);
        let mut j0 = i64::MIN;
        let mut ok = true;
        for (a, b) in [(kb.u, vb.u), (kb.v, vb.v)] {
            if b == 0 {
                ok &= a >= 0;
            } else {
                j0 = j0.max((-a).div_euclid(b) + i64::from((-a).rem_euclid(b) != 0));
            }
        }
        if !ok {
            continue;
        }
        let start = ls.key + j0 * v;
        let sb = apply_matrix(to_basis, start);
        lines.push((start, (sb.u + sb.v) as i32, ls.value()));
    }

    let mut residuals = Vec::new();
    let mut last = None;
    for &r in &opts.r_sequence {
        let mut buf = vec![ZERO; n * n];
        for (k, c) in support.iter() {
            let kb = apply_matrix(to_basis, k);
            let idx = wrap(k.u, n) * n + wrap(k.v, n);
            if k.is_zero() {
                buf[idx] += c;
            } else if in_first_quadrant(kb) {
                buf[idx] += 2.0 * c * r.powi(kb.u as i32 + kb.v as i32);
            }
        }
        fft.inverse(&mut buf);
        let rv = r.powi(v_weight);
        let h = 2.0 * PI / n as f64;
        let lines = &lines;
        let mut g = buf;
        par::for_each_chunk(&mut g, n, |j1, row| {
            for (j2, z) in row.iter_mut().enumerate() {
                let th = (h * j1 as f64, h * j2 as f64);
                let phase = |p: FrequencyPoint| {
                    Complex64::from_polar(1.0, p.u as f64 * th.0 + p.v as f64 * th.1)
                };
                for (start, w, s) in lines {
                    let denom = Complex64::new(1.0, 0.0) - rv * phase(v);
                    *z -= 2.0 * s * r.powi(*w) * phase(*start) / denom;
                }
            }
        });
        let alpha: Vec<Complex64> = g.iter().map(|z| (0.5 * z).exp()).collect();
        let cutoff = 2.0 * PI / n as f64;
        let (mut acc, mut used) = (0.0, 0usize);
        for (idx, a) in alpha.iter().enumerate() {
            if distance_to_subgroup(f.node(idx), v) < cutoff {
                continue;
            }
            let d = a.norm_sqr() - f.values[idx].re;
            acc += d * d;
            used += 1;
        }
        residuals.push(RadiusResidual {
            r,
            l2_off_subgroup: (acc / used.max(1) as f64).sqrt(),
            nodes_used: used,
        });
        last = Some((g.iter().map(|z| 0.5 * z).collect::<Vec<_>>(), r));
    }
    let (log_alpha, r) = last.ok_or_else(|| Error::InvalidConfig("empty r_sequence".into()))?;
    Ok((
        log_alpha,
        Some(SingularReport {
            transfer,
            residuals,
        }),
        r,
    ))
}

/// Recomputes the residuals and leaks from the stored coefficients.
pub fn verify_factorization(
    f: &GridFunction,
    fact: &FactorizationResult,
) -> Result<FactorizationDiagnostics> {
    let alpha = crate::symbol::synthesize(&fact.alpha_coeffs, f.n)?;
    let (residual_sup, residual_l2) = residuals(f, &alpha);
    let leak = |m: &FourierMap| -> f64 {
        m.iter()
            .filter(|(k, _)| !fact.cone.contains(*k))
            .map(|(_, c)| c.norm())
            .sum()
    };
    Ok(FactorizationDiagnostics {
        residual_sup,
        residual_l2,
        leak_alpha: leak(&fact.alpha_coeffs),
        leak_beta: leak(&fact.beta_coeffs),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorLabel {
    Alpha,
    AlphaBar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeAssignment {
    pub labels: Vec<FactorLabel>,
    /// Maximal cyclic runs of equal labels, starting with an α-run.
    pub runs: Vec<Vec<usize>>,
    /// Sorted sides carrying α.
    pub first: Vec<usize>,
    /// Sorted sides carrying ᾱ.
    pub second: Vec<usize>,
    /// Vertex (1-based) whose cone contains the factorization cone.
    pub vertex: usize,
}

/// Labels each side with α when the cone lies in its origin half-plane and
/// with ᾱ when it lies in the opposite one.
pub fn assign_edge_factors(t: &TriangleInstance, cone: &ConeSpec) -> Result<EdgeAssignment> {
    let poly = t.polygon();
    let m = poly.len();
    let vertex = (1..=m)
        .find(|&k| {
            vertex_cone(&poly, k)
                .map(|vc| vc.contains(cone.e1.point()) && vc.contains(cone.e2.point()))
                .unwrap_or(false)
        })
        .ok_or(Error::ConeNotInVertexCone)?;
    let hs = poly.half_spaces();
    let mut labels = Vec::with_capacity(m);
    for nrm in &hs.normals {
        let a = nrm.point().dot(cone.e1.point());
        let b = nrm.point().dot(cone.e2.point());
        let label = if a <= 0 && b <= 0 {
            FactorLabel::Alpha
        } else if a >= 0 && b >= 0 {
            FactorLabel::AlphaBar
        } else {
            return Err(Error::ConeNotInVertexCone);
        };
        labels.push(label);
    }
    // rotate to the start of an α-run
    let start = (0..m)
        .find(|&i| labels[i] == FactorLabel::Alpha && labels[(i + m - 1) % m] != FactorLabel::Alpha)
        .unwrap_or(0);
    let mut runs: Vec<Vec<usize>> = Vec::new();
    for s in 0..m {
        let i = (start + s) % m;
        match runs.last_mut() {
            Some(run) if labels[run[0] - 1] == labels[i] => run.push(i + 1),
            _ => runs.push(vec![i + 1]),
        }
    }
    let pick = |l: FactorLabel| -> Vec<usize> {
        (1..=m).filter(|&i| labels[i - 1] == l).collect()
    };
    Ok(EdgeAssignment {
        first: pick(FactorLabel::Alpha),
        second: pick(FactorLabel::AlphaBar),
        labels,
        runs,
        vertex,
    })
}

/// Minimal split and matching factor labels at the origin vertex.
pub fn triangle_split(t: &TriangleInstance) -> Result<(crate::lattice::EdgeSplit, EdgeAssignment)> {
    let split = minimal_split(&t.polygon(), 1)?;
    let assignment = assign_edge_factors(t, &split.cone)?;
    Ok((split, assignment))
}

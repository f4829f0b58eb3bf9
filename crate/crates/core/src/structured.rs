//! Inversion of T_Λ(f) on a triangle through the two-block Hankel exchange
//! system, realized on a truncated frequency box.
//!
//! With the split (α, ᾱ) and φ = α/ᾱ the unknowns live on
//! B₁ = box ∩ 𝕊₁⁻ and B₂ = box ∩ 𝕊₂⁻; the exchange blocks are
//! H(1,2)θ = Π₁(φθ) and H(2,1)θ = Π₂(φ̄θ).

use std::sync::OnceLock;

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Mat, Side};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorization::{assign_edge_factors, EdgeAssignment, FactorizationResult};
use crate::fft::{wrap, Fft2};
use crate::lattice::{FrequencyPoint, TriangleInstance};
use crate::par;
use crate::symbol::GridFunction;
use crate::toeplitz::OperatorMatrix;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    Neumann,
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredOptions {
    /// Box radius; `None` picks [`default_box_radius`].
    pub box_m: Option<usize>,
    pub solver: SolverMode,
    /// Switch to the dense solve when the iteration stalls.
    pub allow_fallback: bool,
    pub tol_solve: f64,
    /// Iteration cap; `None` means ten times the box size.
    pub max_iters: Option<usize>,
    /// Largest block size for the dense exchange block and its LU.
    pub dense_limit: usize,
}

impl Default for StructuredOptions {
    fn default() -> Self {
        Self {
            box_m: None,
            solver: SolverMode::Neumann,
            allow_fallback: true,
            tol_solve: 1e-12,
            max_iters: None,
            dense_limit: 6000,
        }
    }
}

/// max(2·extent, extent + 16).
pub fn default_box_radius(t: &TriangleInstance) -> usize {
    let e = t.extent();
    (2 * e).max(e + 16)
}

/// Index sets of the truncated problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralBox {
    pub m: usize,
    pub b1: Vec<FrequencyPoint>,
    pub b2: Vec<FrequencyPoint>,
    pub lattice: Vec<FrequencyPoint>,
}

impl SpectralBox {
    pub fn new(t: &TriangleInstance, split: &EdgeAssignment, m: usize) -> Result<Self> {
        let extent = t.extent();
        if m < extent {
            return Err(Error::BoxTooSmall { m, extent });
        }
        let hs = &t.half_spaces;
        let mi = m as i64;
        let (mut b1, mut b2) = (Vec::new(), Vec::new());
        for u in -mi..=mi {
            for v in -mi..=mi {
                let p = FrequencyPoint::new(u, v);
                if split.first.iter().any(|&i| hs.in_complement(i, p)) {
                    b1.push(p);
                }
                if split.second.iter().any(|&i| hs.in_complement(i, p)) {
                    b2.push(p);
                }
            }
        }
        Ok(Self {
            m,
            b1,
            b2,
            lattice: t.lattice_points(),
        })
    }
}

/// How a batch of right-hand sides was solved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub mode: SolverMode,
    pub iterations: usize,
    /// Relative residual ‖(I − 𝒩)θ₂ − ζ‖ / ‖ζ‖ (Frobenius over the batch).
    pub residual: f64,
    pub fell_back: bool,
}

#[derive(Debug, Clone)]
pub struct TriangleSolution {
    pub theta1: Vec<Complex64>,
    pub theta2: Vec<Complex64>,
    pub report: SolveReport,
}

/// One column of the inverse.
#[derive(Debug, Clone)]
pub struct StructuredColumn {
    pub q: FrequencyPoint,
    /// Coefficients on the lattice points, in lattice order.
    pub values: Vec<Complex64>,
    /// L² mass of the grid result outside the triangle.
    pub leakage: f64,
}

/// The truncated exchange system of one factorization on one triangle.
pub struct HankelSystem {
    pub spectral_box: SpectralBox,
    pub assignment: EdgeAssignment,
    pub grid_n: usize,
    pub options: StructuredOptions,
    /// Σ|(ᾱ/α)ˆ(k)| over frequencies outside the difference box [−2M, 2M]².
    pub ratio_tail_mass: f64,
    fft: Fft2,
    phi_grid: Vec<Complex64>,
    inv_alpha_grid: Vec<Complex64>,
    inv_alphabar_grid: Vec<Complex64>,
    inv_f_grid: Vec<Complex64>,
    phi_hat: Vec<Complex64>,
    phibar_hat: Vec<Complex64>,
    inv_alpha_hat: Vec<Complex64>,
    inv_alphabar_hat: Vec<Complex64>,
    h12: Mat<Complex64>,
    lu: OnceLock<PartialPivLu<Complex64>>,
}

impl std::fmt::Debug for HankelSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HankelSystem")
            .field("m", &self.spectral_box.m)
            .field("b1", &self.spectral_box.b1.len())
            .field("b2", &self.spectral_box.b2.len())
            .field("grid_n", &self.grid_n)
            .finish()
    }
}

fn coefficients(values: &[Complex64], fft: &Fft2) -> Vec<Complex64> {
    let n = fft.size();
    let g = GridFunction {
        n,
        values: values.to_vec(),
    };
    g.coefficient_buffer(fft)
}

impl HankelSystem {
    fn at(&self, buf: &[Complex64], k: FrequencyPoint) -> Complex64 {
        let n = self.grid_n;
        buf[wrap(k.u, n) * n + wrap(k.v, n)]
    }

    pub fn box_radius(&self) -> usize {
        self.spectral_box.m
    }

    /// Coefficient of ᾱ/α at `k`.
    pub fn phi_ratio_coefficient(&self, k: FrequencyPoint) -> Complex64 {
        self.at(&self.phibar_hat, k)
    }

    /// Dense block of H(1,2).
    pub fn exchange_matrix(&self) -> &Mat<Complex64> {
        &self.h12
    }

    fn place(&self, pts: &[FrequencyPoint], vals: &[Complex64]) -> Vec<Complex64> {
        let n = self.grid_n;
        let mut buf = vec![ZERO; n * n];
        for (p, v) in pts.iter().zip(vals) {
            buf[wrap(p.u, n) * n + wrap(p.v, n)] += v;
        }
        buf
    }

    fn to_grid(&self, mut buf: Vec<Complex64>) -> Vec<Complex64> {
        self.fft.inverse(&mut buf);
        buf
    }

    fn to_coefficients(&self, mut grid: Vec<Complex64>) -> Vec<Complex64> {
        self.fft.forward(&mut grid);
        let s = 1.0 / (self.grid_n * self.grid_n) as f64;
        grid.iter_mut().for_each(|z| *z *= s);
        grid
    }

    fn gather(&self, buf: &[Complex64], pts: &[FrequencyPoint]) -> Vec<Complex64> {
        pts.iter().map(|&p| self.at(buf, p)).collect()
    }

    fn block(&self, i: usize) -> &[FrequencyPoint] {
        match i {
            1 => &self.spectral_box.b1,
            2 => &self.spectral_box.b2,
            _ => panic!("block index must be 1 or 2"),
        }
    }

    fn lu(&self) -> Result<&PartialPivLu<Complex64>> {
        let k = self.spectral_box.b2.len();
        if k > self.options.dense_limit {
            return Err(Error::TooLarge {
                size: k,
                limit: self.options.dense_limit,
            });
        }
        Ok(self.lu.get_or_init(|| {
            let mut a = self.h12.adjoint() * &self.h12;
            a *= faer::Scale(Complex64::new(-1.0, 0.0));
            for i in 0..k {
                a[(i, i)] += Complex64::new(1.0, 0.0);
            }
            a.partial_piv_lu()
        }))
    }
}

/// Builds the exchange system of an exact-path factorization.
pub fn build_system(
    fact: &FactorizationResult,
    t: &TriangleInstance,
    options: &StructuredOptions,
) -> Result<HankelSystem> {
    if !fact.is_exact() {
        return Err(Error::SingularPathUnsupported);
    }
    let assignment = assign_edge_factors(t, &fact.cone)?;
    let m = options.box_m.unwrap_or_else(|| default_box_radius(t));
    let spectral_box = SpectralBox::new(t, &assignment, m)?;
    let largest = spectral_box.b1.len().max(spectral_box.b2.len());
    if largest > options.dense_limit {
        return Err(Error::TooLarge {
            size: largest,
            limit: options.dense_limit,
        });
    }
    let grid_n = fact.grid_n.max((4 * m + 4).next_power_of_two());
    let fft = Fft2::new(grid_n);
    let alpha = fact.alpha_on_grid(grid_n)?;
    let phi_grid: Vec<Complex64> = alpha.values.iter().map(|a| a / a.conj()).collect();
    let inv_alpha_grid: Vec<Complex64> = alpha.values.iter().map(|a| 1.0 / a).collect();
    let inv_alphabar_grid: Vec<Complex64> = inv_alpha_grid.iter().map(|z| z.conj()).collect();
    let inv_f_grid: Vec<Complex64> = alpha
        .values
        .iter()
        .map(|a| Complex64::new(1.0 / a.norm_sqr(), 0.0))
        .collect();
    let phibar: Vec<Complex64> = phi_grid.iter().map(|z| z.conj()).collect();
    let phi_hat = coefficients(&phi_grid, &fft);
    let phibar_hat = coefficients(&phibar, &fft);
    let inv_alpha_hat = coefficients(&inv_alpha_grid, &fft);
    let inv_alphabar_hat = coefficients(&inv_alphabar_grid, &fft);

    let n = grid_n as i64;
    let lim = 2 * m as i64;
    let mut tail = 0.0;
    for (idx, c) in phibar_hat.iter().enumerate() {
        let (u, v) = (
            crate::fft::unwrap(idx / grid_n, grid_n),
            crate::fft::unwrap(idx % grid_n, grid_n),
        );
        debug_assert!(u.abs() <= n / 2 && v.abs() <= n / 2);
        if u.abs() > lim || v.abs() > lim {
            tail += c.norm();
        }
    }

    let (b1, b2) = (&spectral_box.b1, &spectral_box.b2);
    let rows: Vec<Vec<Complex64>> = par::map_slice(b1, |&p| {
        b2.iter()
            .map(|&q| {
                let k = p - q;
                phi_hat[wrap(k.u, grid_n) * grid_n + wrap(k.v, grid_n)]
            })
            .collect()
    });
    let h12 = Mat::from_fn(b1.len(), b2.len(), |i, j| rows[i][j]);
    Ok(HankelSystem {
        spectral_box,
        assignment,
        grid_n,
        options: options.clone(),
        ratio_tail_mass: tail,
        fft,
        phi_grid,
        inv_alpha_grid,
        inv_alphabar_grid,
        inv_f_grid,
        phi_hat,
        phibar_hat,
        inv_alpha_hat,
        inv_alphabar_hat,
        h12,
        lu: OnceLock::new(),
    })
}

/// Matrix-free H(i, j): multiply on the grid by Φ_j/Φ_i and mask to B_i.
pub fn apply_exchange(
    sys: &HankelSystem,
    i: usize,
    j: usize,
    theta: &[Complex64],
) -> Vec<Complex64> {
    let src = sys.block(j);
    assert_eq!(theta.len(), src.len(), "input does not match block {j}");
    if i == j {
        return theta.to_vec();
    }
    let mut grid = sys.to_grid(sys.place(src, theta));
    let mult = &sys.phi_grid;
    for (z, p) in grid.iter_mut().zip(mult) {
        // H(1,2) multiplies by φ, H(2,1) by φ̄ = 1/φ
        *z *= if i == 1 { *p } else { p.conj() };
    }
    let coeffs = sys.to_coefficients(grid);
    sys.gather(&coeffs, sys.block(i))
}

/// Dense H over B₁ ⊕ B₂ with both off-diagonal blocks built independently.
pub fn assemble_h(sys: &HankelSystem) -> Result<OperatorMatrix> {
    let (b1, b2) = (&sys.spectral_box.b1, &sys.spectral_box.b2);
    let (n1, n2) = (b1.len(), b2.len());
    let size = n1 + n2;
    if size > sys.options.dense_limit {
        return Err(Error::TooLarge {
            size,
            limit: sys.options.dense_limit,
        });
    }
    let data = Mat::from_fn(size, size, |r, c| {
        if r == c {
            Complex64::new(1.0, 0.0)
        } else if r < n1 && c >= n1 {
            sys.at(&sys.phi_hat, b1[r] - b2[c - n1])
        } else if r >= n1 && c < n1 {
            sys.at(&sys.phibar_hat, b2[r - n1] - b1[c])
        } else {
            ZERO
        }
    });
    let mut index_map = b1.clone();
    index_map.extend_from_slice(b2);
    Ok(OperatorMatrix {
        index_map,
        data,
        block_offsets: vec![0, n1],
    })
}

/// γ₁ = Π₁(χ^q/ᾱ), γ₂ = Π₂(χ^q/α).
pub fn gamma_field(
    sys: &HankelSystem,
    q: FrequencyPoint,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    if !sys.spectral_box.lattice.contains(&q) {
        return Err(Error::PointOutsideTriangle(q.u, q.v));
    }
    let g1 = sys
        .spectral_box
        .b1
        .iter()
        .map(|&p| sys.at(&sys.inv_alphabar_hat, p - q))
        .collect();
    let g2 = sys
        .spectral_box
        .b2
        .iter()
        .map(|&p| sys.at(&sys.inv_alpha_hat, p - q))
        .collect();
    Ok((g1, g2))
}

fn frob(m: &Mat<Complex64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

fn apply_n(h12: &Mat<Complex64>, x: &Mat<Complex64>) -> Mat<Complex64> {
    let y = h12 * x;
    h12.adjoint() * &y
}

/// Solves (I − 𝒩)Θ = Z column by column in one batch.
fn solve_block(sys: &HankelSystem, z: &Mat<Complex64>) -> Result<(Mat<Complex64>, SolveReport)> {
    let zn = frob(z);
    let residual_of = |theta: &Mat<Complex64>| -> f64 {
        if zn == 0.0 {
            return 0.0;
        }
        let r = theta - apply_n(&sys.h12, theta) - z;
        frob(&r) / zn
    };
    let direct = |fell_back: bool, iterations: usize| -> Result<(Mat<Complex64>, SolveReport)> {
        let theta = sys.lu()?.solve(z);
        let residual = residual_of(&theta);
        Ok((
            theta,
            SolveReport {
                mode: SolverMode::Direct,
                iterations,
                residual,
                fell_back,
            },
        ))
    };
    if sys.options.solver == SolverMode::Direct {
        return direct(false, 0);
    }
    let max_iters = sys
        .options
        .max_iters
        .unwrap_or(10 * (sys.spectral_box.b1.len() + sys.spectral_box.b2.len()));
    let tol = sys.options.tol_solve;
    let window = 10;
    // iterations worth the price of a factorization (two products per step)
    let (n1, n2) = (sys.h12.nrows() as f64, sys.h12.ncols() as f64);
    let per_step = 2.0 * n1 * n2 * z.ncols().max(1) as f64;
    let factor_cost = if sys.lu.get().is_some() {
        n2 * n2 * z.ncols() as f64
    } else {
        n1 * n2 * n2 + n2 * n2 * n2 / 3.0
    };
    let break_even = factor_cost / per_step;
    let mut theta = z.clone();
    let mut history: Vec<f64> = Vec::new();
    if zn == 0.0 {
        return Ok((
            theta,
            SolveReport {
                mode: SolverMode::Neumann,
                iterations: 0,
                residual: 0.0,
                fell_back: false,
            },
        ));
    }
    for it in 1..=max_iters {
        let next = z + apply_n(&sys.h12, &theta);
        let step = frob(&(&next - &theta)) / zn;
        theta = next;
        history.push(step);
        if step <= tol {
            let residual = residual_of(&theta);
            return Ok((
                theta,
                SolveReport {
                    mode: SolverMode::Neumann,
                    iterations: it,
                    residual,
                    fell_back: false,
                },
            ));
        }
        if history.len() > window {
            let old = history[history.len() - 1 - window];
            let rate = (step / old).powf(1.0 / window as f64);
            let needed = if rate < 1.0 {
                (tol / step).ln() / rate.ln()
            } else {
                f64::INFINITY
            };
            let stalled = it as f64 + needed > max_iters as f64;
            if stalled || (sys.options.allow_fallback && needed > break_even) {
                if sys.options.allow_fallback {
                    return direct(true, it);
                }
                return Err(Error::SolverDiverged {
                    iterations: it,
                    residual: step,
                });
            }
        }
    }
    if sys.options.allow_fallback {
        return direct(true, max_iters);
    }
    Err(Error::SolverDiverged {
        iterations: max_iters,
        residual: *history.last().unwrap_or(&f64::NAN),
    })
}

fn column_matrix(cols: &[Vec<Complex64>], rows: usize) -> Mat<Complex64> {
    Mat::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

/// θ₂ from (I − 𝒩)θ₂ = ζ and θ₁ = γ₁ − H(1,2)θ₂ for every q in the batch.
pub fn solve_many(sys: &HankelSystem, qs: &[FrequencyPoint]) -> Result<Vec<TriangleSolution>> {
    let mut g1s = Vec::with_capacity(qs.len());
    let mut g2s = Vec::with_capacity(qs.len());
    for &q in qs {
        let (g1, g2) = gamma_field(sys, q)?;
        g1s.push(g1);
        g2s.push(g2);
    }
    let (n1, n2) = (sys.spectral_box.b1.len(), sys.spectral_box.b2.len());
    let g1 = column_matrix(&g1s, n1);
    let g2 = column_matrix(&g2s, n2);
    solve_from_fields(sys, &g1, &g2)
}

fn solve_from_fields(
    sys: &HankelSystem,
    g1: &Mat<Complex64>,
    g2: &Mat<Complex64>,
) -> Result<Vec<TriangleSolution>> {
    let zeta = g2 - sys.h12.adjoint() * g1;
    let (theta2, report) = solve_block(sys, &zeta)?;
    let theta1 = g1 - &sys.h12 * &theta2;
    Ok((0..g1.ncols())
        .map(|j| TriangleSolution {
            theta1: (0..theta1.nrows()).map(|i| theta1[(i, j)]).collect(),
            theta2: (0..theta2.nrows()).map(|i| theta2[(i, j)]).collect(),
            report,
        })
        .collect())
}

pub fn solve_triangle(sys: &HankelSystem, q: FrequencyPoint) -> Result<TriangleSolution> {
    Ok(solve_many(sys, &[q])?.remove(0))
}

/// ζ(q) = Π₂(χ^q/α) − H(2,1)Π₁(χ^q/ᾱ).
pub fn zeta(sys: &HankelSystem, q: FrequencyPoint) -> Result<Vec<Complex64>> {
    let (g1, g2) = gamma_field(sys, q)?;
    let h = apply_exchange(sys, 2, 1, &g1);
    Ok(g2.iter().zip(&h).map(|(a, b)| a - b).collect())
}

/// ‖(I − 𝒩)θ₂ − ζ‖ computed matrix-free.
pub fn reduced_residual(sys: &HankelSystem, theta2: &[Complex64], zeta: &[Complex64]) -> f64 {
    let t = apply_exchange(sys, 1, 2, theta2);
    let nt = apply_exchange(sys, 2, 1, &t);
    theta2
        .iter()
        .zip(&nt)
        .zip(zeta)
        .map(|((a, b), z)| (a - b - z).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Grid evaluation of χ^q/f − θ₁/α − θ₂/ᾱ.
fn column_from_solution(sys: &HankelSystem, q: FrequencyPoint, s: &TriangleSolution) -> StructuredColumn {
    let n = sys.grid_n;
    let t1 = sys.to_grid(sys.place(&sys.spectral_box.b1, &s.theta1));
    let t2 = sys.to_grid(sys.place(&sys.spectral_box.b2, &s.theta2));
    let h = 2.0 * std::f64::consts::PI / n as f64;
    let mut grid = vec![ZERO; n * n];
    par::for_each_chunk(&mut grid, n, |j1, row| {
        for (j2, z) in row.iter_mut().enumerate() {
            let idx = j1 * n + j2;
            let chi = Complex64::from_polar(1.0, h * (q.u as f64 * j1 as f64 + q.v as f64 * j2 as f64));
            *z = chi * sys.inv_f_grid[idx]
                - t1[idx] * sys.inv_alpha_grid[idx]
                - t2[idx] * sys.inv_alphabar_grid[idx];
        }
    });
    let coeffs = sys.to_coefficients(grid);
    let values = sys.gather(&coeffs, &sys.spectral_box.lattice);
    let total: f64 = coeffs.iter().map(|z| z.norm_sqr()).sum();
    let inside: f64 = values.iter().map(|z| z.norm_sqr()).sum();
    StructuredColumn {
        q,
        values,
        leakage: (total - inside).max(0.0).sqrt(),
    }
}

/// Column T_Λ(f)⁻¹χ^q from the structured formula.
pub fn structured_inverse_apply(sys: &HankelSystem, q: FrequencyPoint) -> Result<StructuredColumn> {
    let s = solve_triangle(sys, q)?;
    Ok(column_from_solution(sys, q, &s))
}

/// All columns of the inverse, in lattice order, with the batch report.
pub fn structured_inverse_columns(sys: &HankelSystem) -> Result<(Vec<StructuredColumn>, SolveReport)> {
    let qs = sys.spectral_box.lattice.clone();
    let sols = solve_many(sys, &qs)?;
    let report = sols
        .first()
        .map(|s| s.report)
        .unwrap_or(SolveReport {
            mode: sys.options.solver,
            iterations: 0,
            residual: 0.0,
            fell_back: false,
        });
    let cols = qs
        .iter()
        .zip(&sols)
        .map(|(&q, s)| column_from_solution(sys, q, s))
        .collect();
    Ok((cols, report))
}

/// Trace of the inverse from the structured columns.
pub fn structured_trace(sys: &HankelSystem) -> Result<f64> {
    let (cols, _) = structured_inverse_columns(sys)?;
    Ok(cols.iter().enumerate().map(|(i, c)| c.values[i].re).sum())
}

fn constraint_fields(sys: &HankelSystem, psi: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = sys.grid_n;
    assert_eq!(psi.len(), n * n, "buffer does not match the system grid");
    let g1 = sys.gather(psi, &sys.spectral_box.b1);
    let mut grid = sys.to_grid(psi.to_vec());
    for (z, p) in grid.iter_mut().zip(&sys.phi_grid) {
        *z *= p.conj();
    }
    let g2 = sys.gather(&sys.to_coefficients(grid), &sys.spectral_box.b2);
    (g1, g2)
}

/// (‖Π₁ψ‖, ‖Π₂(φ̄ψ)‖) on the box; both vanish on the range of [`project_k`].
pub fn constraint_residuals(sys: &HankelSystem, psi: &[Complex64]) -> (f64, f64) {
    let (g1, g2) = constraint_fields(sys, psi);
    let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    (norm(&g1), norm(&g2))
}

/// ψ ↦ ψ − θ₁ − φθ₂ where θ solves Hθ = (Π₁ψ, Π₂(φ̄ψ)); ψ is a coefficient
/// buffer on the system grid.
pub fn project_k(sys: &HankelSystem, psi: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = sys.grid_n;
    let (g1, g2) = constraint_fields(sys, psi);
    let (n1, n2) = (g1.len(), g2.len());
    let sol = solve_from_fields(
        sys,
        &Mat::from_fn(n1, 1, |i, _| g1[i]),
        &Mat::from_fn(n2, 1, |i, _| g2[i]),
    )?
    .remove(0);
    let mut t2 = sys.to_grid(sys.place(&sys.spectral_box.b2, &sol.theta2));
    for (z, p) in t2.iter_mut().zip(&sys.phi_grid) {
        *z *= p;
    }
    let mut out = sys.to_coefficients(t2);
    for (p, v) in sys.spectral_box.b1.iter().zip(&sol.theta1) {
        out[wrap(p.u, n) * n + wrap(p.v, n)] += v;
    }
    Ok(psi.iter().zip(&out).map(|(a, b)| a - b).collect())
}

/// Coefficient buffer of χ^q/ᾱ on the system grid.
pub fn reference_field(sys: &HankelSystem, q: FrequencyPoint) -> Vec<Complex64> {
    let n = sys.grid_n;
    let mut out = vec![ZERO; n * n];
    for (idx, c) in sys.inv_alphabar_hat.iter().enumerate() {
        let k = FrequencyPoint::new(crate::fft::unwrap(idx / n, n), crate::fft::unwrap(idx % n, n)) + q;
        out[wrap(k.u, n) * n + wrap(k.v, n)] = *c;
    }
    out
}

/// L² norm of Φ₁θ₁ + Φ₂θ₂ = θ₁ + φθ₂.
pub fn combination_norm(sys: &HankelSystem, theta1: &[Complex64], theta2: &[Complex64]) -> f64 {
    let mut t2 = sys.to_grid(sys.place(&sys.spectral_box.b2, theta2));
    let t1 = sys.to_grid(sys.place(&sys.spectral_box.b1, theta1));
    for ((z, p), a) in t2.iter_mut().zip(&sys.phi_grid).zip(&t1) {
        *z = *z * p + a;
    }
    let c = sys.to_coefficients(t2);
    c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigenpairs of the assembled H, ascending.
pub fn h_eigen(h: &OperatorMatrix) -> Result<(Vec<f64>, Mat<Complex64>)> {
    let e = h
        .data
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::NotPositiveDefinite)?;
    let s = e.S();
    let vals = (0..h.size()).map(|i| s[i].re).collect();
    Ok((vals, e.U().to_owned()))
}

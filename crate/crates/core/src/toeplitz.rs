//! Dense truncated Toeplitz matrices: assembly, Cholesky log-determinant,
//! trace of the inverse and matrix-vector products.

use std::io::Write;
use std::path::Path;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{FrequencyPoint, TriangleInstance};
use crate::par;
use crate::symbol::FourierMap;

/// Dense operator in the monomial basis: row `i` and column `j` belong to
/// `index_map[i]` and `index_map[j]`, with entry `f̂(p_i − p_j)`.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub index_map: Vec<FrequencyPoint>,
    pub data: Mat<Complex64>,
    /// Start row of each block when the index map is a direct sum.
    pub block_offsets: Vec<usize>,
}

impl OperatorMatrix {
    pub fn size(&self) -> usize {
        self.index_map.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.data[(i, j)]
    }

    /// max |M − M*|.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.size();
        let mut d = 0.0f64;
        for i in 0..n {
            for j in i..n {
                d = d.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        d
    }

    /// Largest absolute row sum, an upper bound for the spectral norm.
    pub fn inf_norm(&self) -> f64 {
        let n = self.size();
        (0..n)
            .map(|i| (0..n).map(|j| self.data[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.data
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|_| Error::NotPositiveDefinite)
    }

    /// Writes row-major little-endian complex128 data and a JSON index map.
    pub fn dump(&self, bin_path: &Path, index_path: &Path) -> Result<()> {
        let n = self.size();
        let mut out = std::io::BufWriter::new(std::fs::File::create(bin_path)?);
        for i in 0..n {
            for j in 0..n {
                let z = self.data[(i, j)];
                out.write_all(&z.re.to_le_bytes())?;
                out.write_all(&z.im.to_le_bytes())?;
            }
        }
        out.flush()?;
        let pts: Vec<[i64; 2]> = self.index_map.iter().map(|p| [p.u, p.v]).collect();
        std::fs::write(index_path, serde_json::to_string(&pts)?)?;
        Ok(())
    }
}

/// Matrix of T_Λ(f) over the lattice points of the triangle.
pub fn assemble_toeplitz(f_coeffs: &FourierMap, t: &TriangleInstance) -> OperatorMatrix {
    assemble_on(f_coeffs, &t.lattice_points())
}

/// Matrix of the compression of multiplication by `f` to `points`.
pub fn assemble_on(f_coeffs: &FourierMap, points: &[FrequencyPoint]) -> OperatorMatrix {
    let n = points.len();
    let rows: Vec<Vec<Complex64>> = par::map_range(n, |i| {
        points
            .iter()
            .map(|&q| f_coeffs.get(points[i] - q))
            .collect()
    });
    OperatorMatrix {
        index_map: points.to_vec(),
        data: Mat::from_fn(n, n, |i, j| rows[i][j]),
        block_offsets: vec![0],
    }
}

fn cholesky_factor(m: &OperatorMatrix) -> Result<Mat<Complex64>> {
    let llt = m
        .data
        .llt(Side::Lower)
        .map_err(|_| Error::NotPositiveDefinite)?;
    Ok(llt.L().to_owned())
}

/// ln det M from the Cholesky diagonal.
pub fn cholesky_logdet(m: &OperatorMatrix) -> Result<f64> {
    let l = cholesky_factor(m)?;
    Ok((0..m.size()).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

/// trace M⁻¹ = ‖L⁻¹‖²_F for M = L L*.
pub fn trace_of_inverse(m: &OperatorMatrix) -> Result<f64> {
    let l = cholesky_factor(m)?;
    let n = m.size();
    let mut x = Mat::<Complex64>::identity(n, n);
    l.solve_lower_triangular_in_place(&mut x);
    let cols: Vec<f64> = par::map_range(n, |j| {
        (j..n).map(|i| x[(i, j)].norm_sqr()).sum::<f64>()
    });
    Ok(cols.iter().sum())
}

/// ln det and trace of the inverse from one factorization.
pub fn logdet_and_trace(m: &OperatorMatrix) -> Result<(f64, f64)> {
    let l = cholesky_factor(m)?;
    let n = m.size();
    let logdet = (0..n).map(|i| 2.0 * l[(i, i)].re.ln()).sum();
    let mut x = Mat::<Complex64>::identity(n, n);
    l.solve_lower_triangular_in_place(&mut x);
    let tr = (0..n)
        .map(|j| (j..n).map(|i| x[(i, j)].norm_sqr()).sum::<f64>())
        .sum();
    Ok((logdet, tr))
}

/// Dense inverse via Cholesky.
pub fn inverse(m: &OperatorMatrix) -> Result<Mat<Complex64>> {
    let llt = m
        .data
        .llt(Side::Lower)
        .map_err(|_| Error::NotPositiveDefinite)?;
    let n = m.size();
    Ok(llt.solve(Mat::<Complex64>::identity(n, n)))
}

/// Dense matrix-vector product.
pub fn apply_operator(m: &OperatorMatrix, x: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = m.size();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    Ok(par::map_range(n, |i| {
        (0..n).map(|j| m.data[(i, j)] * x[j]).sum()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::PrimitiveVector;

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

    fn tri(lambda: u32) -> TriangleInstance {
        TriangleInstance::new(PrimitiveVector::new(-1, 1).unwrap(), 2, lambda).unwrap()
    }

    #[test]
    fn hand_assembled_four_by_four() {
        let m = assemble_toeplitz(&running(), &tri(1));
        // order (0,0), (1,0), (1,1), (2,0)
        let want = [
            [1.25, -0.5, 0.0, 0.0],
            [-0.5, 1.25, 0.0, -0.5],
            [0.0, 0.0, 1.25, 0.0],
            [0.0, -0.5, 0.0, 1.25],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.entry(i, j), c(want[i][j]));
            }
        }
        let ld = cholesky_logdet(&m).unwrap();
        assert!((ld - (425.0f64 / 256.0).ln()).abs() < 1e-14);
        let tr = trace_of_inverse(&m).unwrap();
        assert!((tr - 336.0 / 85.0).abs() < 1e-13);
    }

    #[test]
    fn constant_symbol_is_scaled_identity() {
        let m = assemble_toeplitz(&FourierMap::constant(3.0), &tri(3));
        let n = m.size();
        assert_eq!(n, 16);
        assert!((cholesky_logdet(&m).unwrap() - n as f64 * 3f64.ln()).abs() < 1e-12);
        assert!((trace_of_inverse(&m).unwrap() - n as f64 / 3.0).abs() < 1e-12);
        let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let y = apply_operator(&m, &x).unwrap();
        for (a, b) in y.iter().zip(&x) {
            assert!((a - 3.0 * b).norm() < 1e-14);
        }
    }

    #[test]
    fn non_positive_matrix_is_reported() {
        let m = assemble_toeplitz(&FourierMap::constant(-1.0), &tri(1));
        assert!(matches!(cholesky_logdet(&m), Err(Error::NotPositiveDefinite)));
        assert!(matches!(trace_of_inverse(&m), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn dimension_mismatch() {
        let m = assemble_toeplitz(&running(), &tri(1));
        assert!(matches!(
            apply_operator(&m, &[c(1.0)]),
            Err(Error::DimensionMismatch { expected: 4, got: 1 })
        ));
    }

    #[test]
    fn dump_writes_expected_sizes() {
        let m = assemble_toeplitz(&running(), &tri(1));
        let dir = tempfile::tempdir().unwrap();
        let (b, j) = (dir.path().join("m.bin"), dir.path().join("m.json"));
        m.dump(&b, &j).unwrap();
        let bytes = std::fs::read(&b).unwrap();
        assert_eq!(bytes.len(), 16 * 16);
        assert_eq!(f64::from_le_bytes(bytes[0..8].try_into().unwrap()), 1.25);
        let idx: Vec<[i64; 2]> =
            serde_json::from_str(&std::fs::read_to_string(&j).unwrap()).unwrap();
        assert_eq!(idx[2], [1, 1]);
    }
}

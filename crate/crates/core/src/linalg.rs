//! Dense symmetric linear algebra and multivariate normal sampling.
//!
//! Factorizations and the eigensolver are written out here rather than taken
//! from `nalgebra`, which is used only for storage and products. The PD
//! threshold is deliberately strict: a pivot at or below [`PD_PIVOT_TOL`]
//! is rejected, and callers that need slack add an explicit ridge.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Smallest admissible Cholesky pivot (and eigenvalue for [`inverse_sqrt`]).
pub const PD_PIVOT_TOL: f64 = 1e-12;

/// Relative asymmetry tolerated by [`CovarianceMatrix::new`] before the
/// lower triangle is mirrored.
const SYMMETRY_TOL: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 100;

/// A validated symmetric positive-definite covariance matrix.
///
/// The stored matrix is exactly symmetric: the lower triangle of the input is
/// mirrored. The Cholesky factor computed during validation is kept, so
/// solves against the matrix never refactor.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    entries: DMatrix<f64>,
    factor: LowerTriangularFactor,
}

impl CovarianceMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let entries = symmetrized(entries)?;
        for i in 0..entries.nrows() {
            let d = entries[(i, i)];
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { index: i, pivot: d });
            }
        }
        let factor = cholesky(&entries)?;
        Ok(Self { entries, factor })
    }

    pub fn from_row_slice(dim: usize, values: &[f64]) -> Result<Self> {
        if values.len() != dim * dim {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {dim}x{dim} matrix",
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, values))
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim)).expect("identity is positive definite")
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn factor(&self) -> &LowerTriangularFactor {
        &self.factor
    }

    /// Principal submatrix on `indices`.
    pub fn block(&self, indices: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(indices.len(), indices.len(), |a, b| {
            self.entries[(indices[a], indices[b])]
        })
    }

    pub fn has_unit_diagonal(&self, tol: f64) -> bool {
        (0..self.dim()).all(|i| (self.entries[(i, i)] - 1.0).abs() <= tol)
    }
}

fn symmetrized(mut m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "covariance must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let gap = (m[(i, j)] - m[(j, i)]).abs();
            if !(gap <= SYMMETRY_TOL * scale) {
                return Err(Error::NotSymmetric { row: i, col: j, gap });
            }
            m[(j, i)] = m[(i, j)];
        }
    }
    Ok(m)
}

/// Lower-triangular `L` with `L Lᵀ = Σ` and a strictly positive diagonal.
#[derive(Debug, Clone)]
pub struct LowerTriangularFactor {
    lower: DMatrix<f64>,
}

impl LowerTriangularFactor {
    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.lower
    }

    /// `L Lᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.lower * self.lower.transpose()
    }

    /// Solves `(L Lᵀ) X = B` in place, column by column.
    pub fn solve_in_place(&self, rhs: &mut DMatrix<f64>) {
        assert_eq!(rhs.nrows(), self.dim(), "right-hand side row count");
        let n = self.dim();
        let l = &self.lower;
        for c in 0..rhs.ncols() {
            let mut col = rhs.column_mut(c);
            for i in 0..n {
                let mut acc = col[i];
                for k in 0..i {
                    acc -= l[(i, k)] * col[k];
                }
                col[i] = acc / l[(i, i)];
            }
            for i in (0..n).rev() {
                let mut acc = col[i];
                for k in (i + 1)..n {
                    acc -= l[(k, i)] * col[k];
                }
                col[i] = acc / l[(i, i)];
            }
        }
    }

    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = rhs.clone();
        self.solve_in_place(&mut out);
        out
    }
}

/// Cholesky factorization of a symmetric matrix. Only the lower triangle of
/// `a` is read.
pub fn cholesky(a: &DMatrix<f64>) -> Result<LowerTriangularFactor> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "cholesky of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if !(pivot > PD_PIVOT_TOL) {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        let d = pivot.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut acc = a[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = acc / d;
        }
    }
    Ok(LowerTriangularFactor { lower: l })
}

/// Eigenvalues (ascending) and, optionally, the matching orthonormal
/// eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Option<DMatrix<f64>>,
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigen(a: &DMatrix<f64>, want_vectors: bool) -> Result<SymmetricEigen> {
    let mut a = symmetrized(a.clone())?;
    let n = a.nrows();
    let mut v = want_vectors.then(|| DMatrix::<f64>::identity(n, n));
    let norm = a.norm();

    let mut converged = norm == 0.0 || n < 2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        let off: f64 = (0..n)
            .flat_map(|q| (0..q).map(move |p| (p, q)))
            .map(|(p, q)| a[(p, q)] * a[(p, q)])
            .sum();
        if off.sqrt() <= 1e-15 * norm {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                if let Some(v) = v.as_mut() {
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    if !converged {
        let off: f64 = (0..n)
            .flat_map(|q| (0..q).map(move |p| (p, q)))
            .map(|(p, q)| a[(p, q)] * a[(p, q)])
            .sum();
        if off.sqrt() > 1e-15 * norm {
            return Err(Error::NonConvergence {
                what: "jacobi eigensolver",
                iterations: JACOBI_MAX_SWEEPS,
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = v.map(|v| DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]));
    Ok(SymmetricEigen { values, vectors })
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() == 0 {
        return Err(Error::EmptyInput("min_eigenvalue of an empty matrix"));
    }
    let eig = symmetric_eigen(a, false)?;
    Ok(eig.values[0])
}

/// Symmetric inverse square root `B^{-1/2}` of a symmetric PD matrix.
pub fn inverse_sqrt(b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = symmetric_eigen(b, true)?;
    if let Some((index, &pivot)) = eig
        .values
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v > PD_PIVOT_TOL))
    {
        return Err(Error::NotPositiveDefinite { index, pivot });
    }
    let vectors = eig.vectors.expect("requested eigenvectors");
    let n = b.nrows();
    let mut scaled = vectors.clone();
    for (c, &lambda) in eig.values.iter().enumerate() {
        scaled.column_mut(c).scale_mut(1.0 / lambda.sqrt());
    }
    let m = scaled * vectors.transpose();
    Ok(DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)])))
}

/// Draws `n` i.i.d. rows from `N(mean, Σ)`. Normals are consumed row by row.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &[f64],
    cov: &CovarianceMatrix,
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let p = cov.dim();
    if mean.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "mean has length {}, covariance is {p}x{p}",
            mean.len()
        )));
    }
    let z = standard_normal_matrix(n, p, rng);
    let mut x = z * cov.factor().matrix().transpose();
    for mut row in x.row_iter_mut() {
        for (v, mu) in row.iter_mut().zip(mean) {
            *v += mu;
        }
    }
    Ok(x)
}

/// `n × p` matrix of independent standard normals, filled row-major.
pub(crate) fn standard_normal_matrix<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    rng: &mut R,
) -> DMatrix<f64> {
    let values: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(n, p, &values)
}

//! Gaussian group knockoffs.
//!
//! The knockoff copy `X̃` of a Gaussian design `X ~ N(0, Σ)` is drawn from
//! `X̃ | X ~ N(X − SΣ⁻¹X, 2S − SΣ⁻¹S)` where `S` is group-block-diagonal with
//! blocks `η Σ_{G,G}` and `η = min(2 λ_min(DΣD), 1)`, `D` being the
//! block-diagonal matrix of the inverse square roots of the group blocks.
//! The joint covariance of `(X, X̃)` is then `[[Σ, Σ − S], [Σ − S, Σ]]`,
//! which is invariant under swapping any set of whole groups.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, cholesky, min_eigenvalue, CovarianceMatrix};
use crate::partition::GroupPartition;
use crate::rng::stream_rng;

/// Below this, the (whitened) covariance is treated as singular.
pub const DEGENERATE_EIGEN_TOL: f64 = 1e-10;

/// Relative shrink applied to `η` when `2Σ − S` lands on the PD boundary.
pub const DEFAULT_SHRINK_MARGIN: f64 = 1e-3;

const MAX_SHRINK_ROUNDS: usize = 5;

/// Rows per independently seeded sampling task.
const SAMPLE_CHUNK_ROWS: usize = 256;

/// Everything needed to sample group knockoffs for one covariance.
#[derive(Debug, Clone)]
pub struct KnockoffSpec {
    sigma: CovarianceMatrix,
    s: DMatrix<f64>,
    partition: GroupPartition,
    eta: f64,
}

impl KnockoffSpec {
    /// Builds `S = diag(η Σ_{G_1G_1}, …, η Σ_{G_mG_m})` without checking
    /// that `2Σ − S` is positive definite.
    pub fn from_eta(sigma: CovarianceMatrix, partition: GroupPartition, eta: f64) -> Result<Self> {
        if sigma.dim() != partition.p() {
            return Err(Error::DimensionMismatch(format!(
                "covariance is {}x{0}, partition covers {} features",
                sigma.dim(),
                partition.p()
            )));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
        }
        let p = sigma.dim();
        let mut s = DMatrix::zeros(p, p);
        for group in partition.groups() {
            for &i in group {
                for &j in group {
                    s[(i, j)] = eta * sigma.matrix()[(i, j)];
                }
            }
        }
        Ok(Self {
            sigma,
            s,
            partition,
            eta,
        })
    }

    pub fn sigma(&self) -> &CovarianceMatrix {
        &self.sigma
    }

    pub fn s_matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    /// `2Σ − S`.
    pub fn slack(&self) -> DMatrix<f64> {
        self.sigma.matrix() * 2.0 - &self.s
    }

    /// Whether `2Σ − S` passes the Cholesky PD check.
    pub fn is_strictly_valid(&self) -> bool {
        cholesky(&self.slack()).is_ok()
    }

    /// Joint covariance of `(X, X̃)`.
    pub fn joint_covariance(&self) -> DMatrix<f64> {
        let p = self.dim();
        let sigma = self.sigma.matrix();
        let cross = sigma - &self.s;
        let mut joint = DMatrix::zeros(2 * p, 2 * p);
        joint.view_mut((0, 0), (p, p)).copy_from(sigma);
        joint.view_mut((p, p), (p, p)).copy_from(sigma);
        joint.view_mut((0, p), (p, p)).copy_from(&cross);
        joint.view_mut((p, 0), (p, p)).copy_from(&cross);
        joint
    }
}

/// Original features paired column-for-column with their knockoffs.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDesign {
    x: DMatrix<f64>,
    x_knock: DMatrix<f64>,
    partition: GroupPartition,
}

impl AugmentedDesign {
    pub fn new(x: DMatrix<f64>, x_knock: DMatrix<f64>, partition: GroupPartition) -> Result<Self> {
        if x.shape() != x_knock.shape() {
            return Err(Error::DimensionMismatch(format!(
                "originals are {:?}, knockoffs are {:?}",
                x.shape(),
                x_knock.shape()
            )));
        }
        if x.ncols() != partition.p() {
            return Err(Error::DimensionMismatch(format!(
                "design has {} columns, partition covers {}",
                x.ncols(),
                partition.p()
            )));
        }
        Ok(Self {
            x,
            x_knock,
            partition,
        })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn x_knock(&self) -> &DMatrix<f64> {
        &self.x_knock
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// `[X, X̃]` as one `n × 2p` matrix.
    pub fn combined(&self) -> DMatrix<f64> {
        let (n, p) = self.x.shape();
        let mut out = DMatrix::zeros(n, 2 * p);
        out.view_mut((0, 0), (n, p)).copy_from(&self.x);
        out.view_mut((0, p), (n, p)).copy_from(&self.x_knock);
        out
    }

    /// The design with `X_G` and `X̃_G` exchanged for every listed group.
    pub fn swapped(&self, groups: &[usize]) -> Self {
        let mut out = self.clone();
        for &g in groups {
            for &j in self.partition.group(g) {
                out.x.set_column(j, &self.x_knock.column(j));
                out.x_knock.set_column(j, &self.x.column(j));
            }
        }
        out
    }

    /// Both halves with every column centered and scaled to unit sample
    /// variance.
    pub fn standardized(&self) -> Result<Self> {
        Ok(Self {
            x: standardize_columns(&self.x)?,
            x_knock: standardize_columns(&self.x_knock)?,
            partition: self.partition.clone(),
        })
    }
}

/// Equicorrelated `s_j = min(2 λ_min(Σ), 1)` for a unit-diagonal `Σ`.
pub fn equicorrelated_s(sigma: &CovarianceMatrix) -> Result<Vec<f64>> {
    if !sigma.has_unit_diagonal(1e-8) {
        return Err(Error::InvalidArgument(
            "equicorrelated construction needs a unit-diagonal covariance".into(),
        ));
    }
    let lambda = min_eigenvalue(sigma.matrix())?;
    if lambda <= DEGENERATE_EIGEN_TOL {
        return Err(Error::DegenerateCovariance(format!(
            "lambda_min(sigma) = {lambda:e}"
        )));
    }
    Ok(vec![(2.0 * lambda).min(1.0); sigma.dim()])
}

/// `DΣD` with `D = diag(Σ_{G_1G_1}^{-1/2}, …)`.
pub fn whitened_covariance(
    sigma: &CovarianceMatrix,
    partition: &GroupPartition,
) -> Result<DMatrix<f64>> {
    let p = sigma.dim();
    if partition.p() != p {
        return Err(Error::DimensionMismatch(format!(
            "covariance is {p}x{p}, partition covers {} features",
            partition.p()
        )));
    }
    let mut d = DMatrix::zeros(p, p);
    for group in partition.groups() {
        let root = linalg::inverse_sqrt(&sigma.block(group))?;
        for (a, &i) in group.iter().enumerate() {
            for (b, &j) in group.iter().enumerate() {
                d[(i, j)] = root[(a, b)];
            }
        }
    }
    Ok(&d * sigma.matrix() * &d)
}

/// The group-block-diagonal `S` with `η = min(2 λ_min(DΣD), 1)`. When that
/// `η` puts `2Σ − S` on the PD boundary it is shrunk with
/// [`strict_pd_shrink`] at [`DEFAULT_SHRINK_MARGIN`].
pub fn group_block_s(sigma: &CovarianceMatrix, partition: &GroupPartition) -> Result<KnockoffSpec> {
    let whitened = whitened_covariance(sigma, partition)?;
    let lambda = min_eigenvalue(&whitened)?;
    if lambda <= DEGENERATE_EIGEN_TOL {
        return Err(Error::DegenerateCovariance(format!(
            "lambda_min(D sigma D) = {lambda:e}"
        )));
    }
    let eta = (2.0 * lambda).min(1.0);
    let spec = KnockoffSpec::from_eta(sigma.clone(), partition.clone(), eta)?;
    strict_pd_shrink(spec, DEFAULT_SHRINK_MARGIN)
}

/// Scales `η` by `1 − margin` until `2Σ − S` is strictly PD, at most five
/// times.
pub fn strict_pd_shrink(spec: KnockoffSpec, margin: f64) -> Result<KnockoffSpec> {
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "shrink margin must lie in (0, 1), got {margin}"
        )));
    }
    let mut spec = spec;
    for round in 0..=MAX_SHRINK_ROUNDS {
        if spec.is_strictly_valid() {
            return Ok(spec);
        }
        if round == MAX_SHRINK_ROUNDS {
            break;
        }
        let eta = spec.eta * (1.0 - margin);
        spec = KnockoffSpec::from_eta(spec.sigma, spec.partition, eta)?;
    }
    Err(Error::DegenerateCovariance(format!(
        "2 sigma - S is not positive definite after {MAX_SHRINK_ROUNDS} shrink rounds (eta = {:e})",
        spec.eta
    )))
}

/// Samples `X̃ | X` row by row. The conditional covariance is factored once;
/// rows are filled in chunks, each from its own stream of a master seed
/// drawn from `rng`, so the result does not depend on the thread count.
pub fn sample_group_knockoffs<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    spec: &KnockoffSpec,
    rng: &mut R,
) -> Result<AugmentedDesign> {
    let p = spec.dim();
    if x.ncols() != p {
        return Err(Error::DimensionMismatch(format!(
            "design has {} columns, knockoff spec has {p}",
            x.ncols()
        )));
    }
    let n = x.nrows();
    let sigma_inv_s = spec.sigma.factor().solve(&spec.s);
    let mean = x - x * &sigma_inv_s;
    let cond = &spec.s * 2.0 - &spec.s * &sigma_inv_s;
    let cond = DMatrix::from_fn(p, p, |i, j| 0.5 * (cond[(i, j)] + cond[(j, i)]));
    let factor = cholesky(&cond)?;

    let master: u64 = rng.random();
    let chunks: Vec<DMatrix<f64>> = (0..n.div_ceil(SAMPLE_CHUNK_ROWS))
        .into_par_iter()
        .map(|c| {
            let rows = SAMPLE_CHUNK_ROWS.min(n - c * SAMPLE_CHUNK_ROWS);
            let mut chunk_rng = stream_rng(master, c as u64);
            linalg::standard_normal_matrix(rows, p, &mut chunk_rng)
        })
        .collect();
    let mut z = DMatrix::zeros(n, p);
    for (c, chunk) in chunks.iter().enumerate() {
        z.view_mut((c * SAMPLE_CHUNK_ROWS, 0), chunk.shape())
            .copy_from(chunk);
    }
    let x_knock = mean + z * factor.matrix().transpose();
    AugmentedDesign::new(x.clone(), x_knock, spec.partition.clone())
}

/// Centers each column and scales it to unit sample variance.
pub fn standardize_columns(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::DegenerateInput(format!(
            "need at least 2 rows to standardize, got {n}"
        )));
    }
    let mut out = x.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let mean = col.mean();
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        if !(var > 0.0) {
            return Err(Error::DegenerateInput(format!("column {j} has zero variance")));
        }
        let sd = var.sqrt();
        col.apply(|v| *v = (*v - mean) / sd);
    }
    Ok(out)
}

/// Sample correlation of the columns of `x` plus `ridge · I`.
pub fn estimate_covariance(x: &DMatrix<f64>, ridge: f64) -> Result<CovarianceMatrix> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "ridge must be non-negative, got {ridge}"
        )));
    }
    let z = standardize_columns(x)?;
    let n = z.nrows() as f64;
    let mut cov = z.transpose() * &z / (n - 1.0);
    for i in 0..cov.nrows() {
        cov[(i, i)] += ridge;
    }
    CovarianceMatrix::new(cov)
}

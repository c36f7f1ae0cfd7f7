//! Cyclic coordinate-descent Lasso and the Lasso coefficient difference
//! statistics built on it.
//!
//! The objective is `½‖y − Ab‖² + λ‖b‖₁` (no `1/n` factor). Coordinates are
//! visited in index order every sweep, starting from `b = 0`. When an
//! original column and its knockoff are exact duplicates, the earlier
//! coordinate (the original) absorbs the whole coefficient.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::knockoff::AugmentedDesign;

pub const MAX_SWEEPS: usize = 10_000;
pub const CHANGE_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct LassoFit {
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after each sweep.
    pub objective_trace: Vec<f64>,
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub fn objective(a: &DMatrix<f64>, y: &[f64], b: &[f64], lambda: f64) -> f64 {
    let r = DVector::from_column_slice(y) - a * DVector::from_column_slice(b);
    0.5 * r.norm_squared() + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
}

/// Minimizes `½‖y − Ab‖² + λ‖b‖₁`. A fit that exhausts [`MAX_SWEEPS`] is
/// still returned, with `converged = false`.
pub fn fit_lasso(a: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<LassoFit> {
    let (n, d) = a.shape();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "design has {n} rows, response has {}",
            y.len()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    let col_sq: Vec<f64> = a.column_iter().map(|c| c.norm_squared()).collect();
    let mut b = vec![0.0; d];
    let mut r = y.to_vec();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;

    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for k in 0..d {
            if col_sq[k] == 0.0 {
                continue;
            }
            let col = a.column(k);
            let col = col.as_slice();
            let corr: f64 = col.iter().zip(&r).map(|(x, r)| x * r).sum();
            let updated = soft_threshold(corr + col_sq[k] * b[k], lambda) / col_sq[k];
            let delta = updated - b[k];
            if delta != 0.0 {
                for (r, x) in r.iter_mut().zip(col) {
                    *r -= delta * x;
                }
                b[k] = updated;
                max_change = max_change.max(delta.abs());
            }
        }
        let l1: f64 = b.iter().map(|v| v.abs()).sum();
        trace.push(0.5 * r.iter().map(|v| v * v).sum::<f64>() + lambda * l1);
        if max_change < CHANGE_TOL {
            converged = true;
            break;
        }
    }
    Ok(LassoFit {
        coefficients: b,
        lambda,
        iterations: sweeps,
        converged,
        objective_trace: trace,
    })
}

/// Largest KKT violation of `b` for the Lasso objective.
pub fn kkt_residual(a: &DMatrix<f64>, y: &[f64], b: &[f64], lambda: f64) -> f64 {
    let r = DVector::from_column_slice(y) - a * DVector::from_column_slice(b);
    let grad = a.transpose() * r;
    grad.iter()
        .zip(b)
        .map(|(g, &bk)| {
            if bk == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g - lambda * bk.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

fn centered(y: &[f64]) -> Vec<f64> {
    let mean = y.iter().sum::<f64>() / y.len().max(1) as f64;
    y.iter().map(|v| v - mean).collect()
}

/// Lasso on `[X, X̃]` against the centered response; fails if the solver
/// does not converge.
pub fn augmented_lasso(design: &AugmentedDesign, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let fit = fit_lasso(&design.combined(), &centered(y), lambda)?;
    if !fit.converged {
        return Err(Error::NonConvergence {
            what: "lasso coordinate descent",
            iterations: fit.iterations,
        });
    }
    Ok(fit.coefficients)
}

/// `W_j = |b_j| − |b_{j+p}|` for every feature.
pub fn lcd_from_coefficients(b: &[f64]) -> Vec<f64> {
    let p = b.len() / 2;
    (0..p).map(|j| b[j].abs() - b[j + p].abs()).collect()
}

/// `W_g = Σ_{i∈G_g} |b_i| − Σ_{i∈G_g} |b_{i+p}|` for every group.
pub fn group_lcd_from_coefficients(b: &[f64], design: &AugmentedDesign) -> Vec<f64> {
    let p = design.p();
    design
        .partition()
        .groups()
        .iter()
        .map(|g| g.iter().map(|&i| b[i].abs()).sum::<f64>() - g.iter().map(|&i| b[i + p].abs()).sum::<f64>())
        .collect()
}

pub fn lcd_statistic(design: &AugmentedDesign, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    Ok(lcd_from_coefficients(&augmented_lasso(design, y, lambda)?))
}

pub fn group_lcd_statistic(design: &AugmentedDesign, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let b = augmented_lasso(design, y, lambda)?;
    Ok(group_lcd_from_coefficients(&b, design))
}

/// Default penalty `0.5 · σ̂ · √(2 ln(2p) / n)` on the per-observation scale,
/// multiplied by `n` to match the unnormalized objective. `σ̂` comes from
/// the residuals of a ridge fit with penalty `0.1 n`, corrected by its
/// effective degrees of freedom.
pub fn default_lambda(design: &AugmentedDesign, y: &[f64]) -> Result<f64> {
    let a = design.combined();
    let (n, d) = a.shape();
    let y = DVector::from_vec(centered(y));
    let alpha = 0.1 * n as f64;
    let mut gram = a.transpose() * &a;
    for i in 0..d {
        gram[(i, i)] += alpha;
    }
    let factor = crate::linalg::cholesky(&gram)?;
    let rhs = DMatrix::from_column_slice(d, 1, (a.transpose() * &y).as_slice());
    let coef = factor.solve(&rhs);
    let resid = &y - &a * coef.column(0);
    let inverse = factor.solve(&DMatrix::identity(d, d));
    let dof = d as f64 - alpha * inverse.trace();
    let sigma = (resid.norm_squared() / (n as f64 - dof).max(1.0)).sqrt();
    let p = design.p() as f64;
    Ok(0.5 * sigma * (2.0 * (2.0 * p).ln() / n as f64).sqrt() * n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::GroupPartition;
    use crate::rng::stream_rng;

    #[test]
    fn orthonormal_soft_threshold() {
        // Columns e1, e2 of R^3: Aᵀy = (3, 0.5).
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let fit = fit_lasso(&a, &[3.0, 0.5, 9.0], 1.0).unwrap();
        assert!(fit.converged);
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert_eq!(fit.coefficients[1], 0.0);
    }

    #[test]
    fn unpenalized_square_system_is_least_squares() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let fit = fit_lasso(&a, &[5.0, 10.0], 0.0).unwrap();
        // Solution of [[2,1],[1,3]] b = (5, 10) is (1, 3).
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-6);
        assert!((fit.coefficients[1] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn full_shrinkage_above_max_correlation() {
        let a = crate::linalg::standard_normal_matrix(20, 5, &mut stream_rng(1, 0));
        let y: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let lmax = (a.transpose() * DVector::from_vec(y.clone())).amax();
        let fit = fit_lasso(&a, &y, lmax).unwrap();
        assert!(fit.coefficients.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn objective_never_increases() {
        let a = crate::linalg::standard_normal_matrix(30, 12, &mut stream_rng(2, 0));
        let y: Vec<f64> = (0..30).map(|i| (i as f64 * 0.3).cos()).collect();
        let fit = fit_lasso(&a, &y, 0.5).unwrap();
        for w in fit.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn lcd_arithmetic() {
        assert_eq!(lcd_from_coefficients(&[2.0, 0.0, 0.5, 1.0]), vec![1.5, -1.0]);
    }

    #[test]
    fn group_lcd_arithmetic() {
        let part = GroupPartition::new(2, vec![vec![0, 1]]).unwrap();
        let z = DMatrix::zeros(1, 2);
        let design = AugmentedDesign::new(z.clone(), z, part).unwrap();
        assert_eq!(group_lcd_from_coefficients(&[1.0, -2.0, 0.5, 0.5], &design), vec![2.0]);
    }

    #[test]
    fn duplicated_columns_split_the_single_fit() {
        let mut rng = stream_rng(3, 0);
        let x = crate::knockoff::standardize_columns(&crate::linalg::standard_normal_matrix(
            40, 3, &mut rng,
        ))
        .unwrap();
        let y: Vec<f64> = (0..40).map(|i| 2.0 * x[(i, 0)] - x[(i, 2)]).collect();
        let design =
            AugmentedDesign::new(x.clone(), x.clone(), GroupPartition::singletons(3).unwrap()).unwrap();
        let b = augmented_lasso(&design, &y, 2.0).unwrap();
        let single = fit_lasso(&x, &centered(&y), 2.0).unwrap();
        for j in 0..3 {
            assert!((b[j] + b[j + 3] - single.coefficients[j]).abs() < 1e-5);
            assert!(b[j] * b[j + 3] >= 0.0);
        }
    }
}

//! Synthetic group-sparse regression data.
//!
//! Features are `N(0, Σ)` with unit variances, correlation `ρ` inside a
//! group and `γρ` across groups. `k` groups carry signal; every feature of
//! a signal group gets coefficient `±amplitude` with an independent sign.
//! The response is either linear, `y = Xβ + ε`, or single-index,
//! `y = g(Xβ) + ε` with `g(x) = (x/20)³ + 4(x/20)²`, and `ε ~ N(0, 1)`.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{sample_mvn, CovarianceMatrix};
use crate::partition::GroupPartition;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseModel {
    Linear,
    SingleIndex,
}

impl ResponseModel {
    pub fn name(self) -> &'static str {
        match self {
            ResponseModel::Linear => "linear",
            ResponseModel::SingleIndex => "single_index",
        }
    }
}

impl std::str::FromStr for ResponseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ResponseModel::Linear),
            "single_index" | "single-index" => Ok(ResponseModel::SingleIndex),
            other => Err(Error::InvalidArgument(format!("unknown response model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimDesign {
    pub n: usize,
    pub m: usize,
    pub group_size: usize,
    pub k: usize,
    pub amplitude: f64,
    pub rho: f64,
    pub gamma: f64,
    pub model: ResponseModel,
    pub seed: u64,
}

impl Default for SimDesign {
    /// Desk-scale linear design: p = 200 in 20 groups of 10, 4 signal groups.
    fn default() -> Self {
        Self {
            n: 600,
            m: 20,
            group_size: 10,
            k: 4,
            amplitude: 1.5,
            rho: 0.0,
            gamma: 0.0,
            model: ResponseModel::Linear,
            seed: 0,
        }
    }
}

impl SimDesign {
    /// Full-scale design: p = 1000 in 100 groups of 10, 20 signal groups,
    /// n = 1000.
    pub fn full_scale() -> Self {
        Self {
            n: 1000,
            m: 100,
            k: 20,
            ..Self::default()
        }
    }

    pub fn p(&self) -> usize {
        self.m * self.group_size
    }

    pub fn partition(&self) -> Result<GroupPartition> {
        GroupPartition::contiguous(self.m, self.group_size)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.group_size == 0 {
            return Err(Error::InvalidArgument("need at least one group of one feature".into()));
        }
        if self.k > self.m {
            return Err(Error::InvalidArgument(format!(
                "k = {} signal groups exceeds m = {}",
                self.k, self.m
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidArgument(format!("rho = {} outside [0, 1)", self.rho)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidArgument(format!("gamma = {} outside [0, 1]", self.gamma)));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidArgument("amplitude must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimDataset {
    pub x: DMatrix<f64>,
    pub y: Vec<f64>,
    pub beta: Vec<f64>,
    /// Signal groups, ascending.
    pub true_groups: Vec<usize>,
}

pub fn make_covariance(design: &SimDesign) -> Result<CovarianceMatrix> {
    design.validate()?;
    let p = design.p();
    let size = design.group_size;
    let (rho, between) = (design.rho, design.gamma * design.rho);
    let entries = DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else if i / size == j / size {
            rho
        } else {
            between
        }
    });
    CovarianceMatrix::new(entries).map_err(|e| {
        Error::DegenerateCovariance(format!(
            "rho = {rho}, gamma = {}, m = {}, group size = {size}: {e}",
            design.gamma, design.m
        ))
    })
}

/// Draws `S₀` (k groups, uniformly without replacement) and the signs.
pub fn gen_coefficients<R: Rng + ?Sized>(
    design: &SimDesign,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<usize>)> {
    design.validate()?;
    let mut groups = sample(rng, design.m, design.k).into_vec();
    groups.sort_unstable();
    let mut beta = vec![0.0; design.p()];
    for &g in &groups {
        for j in g * design.group_size..(g + 1) * design.group_size {
            beta[j] = if rng.random::<bool>() {
                design.amplitude
            } else {
                -design.amplitude
            };
        }
    }
    Ok((beta, groups))
}

/// `g(x) = (x/20)³ + 4(x/20)²`.
pub fn single_index_link(x: f64) -> f64 {
    let t = x / 20.0;
    t * t * t + 4.0 * t * t
}

/// Response from given noise.
pub fn response_with_noise(
    x: &DMatrix<f64>,
    beta: &[f64],
    model: ResponseModel,
    noise: &[f64],
) -> Result<Vec<f64>> {
    if x.ncols() != beta.len() || x.nrows() != noise.len() {
        return Err(Error::DimensionMismatch(format!(
            "X is {}x{}, beta has {}, noise has {}",
            x.nrows(),
            x.ncols(),
            beta.len(),
            noise.len()
        )));
    }
    let eta = x * nalgebra::DVector::from_column_slice(beta);
    Ok(eta
        .iter()
        .zip(noise)
        .map(|(&lin, &e)| match model {
            ResponseModel::Linear => lin + e,
            ResponseModel::SingleIndex => single_index_link(lin) + e,
        })
        .collect())
}

pub fn gen_response<R: Rng + ?Sized>(
    x: &DMatrix<f64>,
    beta: &[f64],
    model: ResponseModel,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let noise: Vec<f64> = (0..x.nrows()).map(|_| rng.sample(StandardNormal)).collect();
    response_with_noise(x, beta, model, &noise)
}

/// One dataset from `design.seed`, each ingredient on its own sub-stream.
pub fn generate(design: &SimDesign, sigma: &CovarianceMatrix) -> Result<SimDataset> {
    design.validate()?;
    let x = sample_mvn(
        &vec![0.0; design.p()],
        sigma,
        design.n,
        &mut Stream::Covariates.rng(design.seed),
    )?;
    let (beta, true_groups) = gen_coefficients(design, &mut Stream::Coefficients.rng(design.seed))?;
    let y = gen_response(&x, &beta, design.model, &mut Stream::Noise.rng(design.seed))?;
    Ok(SimDataset {
        x,
        y,
        beta,
        true_groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn covariance_single_group() {
        let d = SimDesign {
            m: 1,
            group_size: 2,
            k: 0,
            rho: 0.5,
            ..SimDesign::default()
        };
        let sigma = make_covariance(&d).unwrap();
        assert_eq!(sigma.matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]));
    }

    #[test]
    fn covariance_block_and_identity_cases() {
        let d = SimDesign {
            m: 3,
            group_size: 2,
            k: 1,
            rho: 0.4,
            gamma: 0.0,
            ..SimDesign::default()
        };
        let sigma = make_covariance(&d).unwrap();
        assert_eq!(sigma.matrix()[(0, 2)], 0.0);
        assert_eq!(sigma.matrix()[(0, 1)], 0.4);

        let d = SimDesign { rho: 0.0, gamma: 0.7, ..d };
        assert_eq!(make_covariance(&d).unwrap().matrix(), &DMatrix::<f64>::identity(6, 6));
    }

    #[test]
    fn coefficients_support_matches_groups() {
        let d = SimDesign::default();
        let (beta, groups) = gen_coefficients(&d, &mut stream_rng(1, 0)).unwrap();
        assert_eq!(groups.len(), d.k);
        let nonzero: Vec<usize> = (0..d.p()).filter(|&j| beta[j] != 0.0).collect();
        assert_eq!(nonzero.len(), d.k * d.group_size);
        for &j in &nonzero {
            assert!(groups.contains(&(j / d.group_size)));
            assert_eq!(beta[j].abs(), 1.5);
        }
    }

    #[test]
    fn coefficients_all_or_nothing() {
        let all = SimDesign { k: 20, ..SimDesign::default() };
        let (beta, groups) = gen_coefficients(&all, &mut stream_rng(2, 0)).unwrap();
        assert!(beta.iter().all(|&b| b != 0.0));
        assert_eq!(groups, (0..20).collect::<Vec<_>>());

        let none = SimDesign { k: 0, ..SimDesign::default() };
        let (beta, groups) = gen_coefficients(&none, &mut stream_rng(2, 0)).unwrap();
        assert!(beta.iter().all(|&b| b == 0.0));
        assert!(groups.is_empty());
    }

    #[test]
    fn link_values() {
        assert_eq!(single_index_link(20.0), 5.0);
        assert_eq!(single_index_link(0.0), 0.0);
    }

    #[test]
    fn one_hot_rows_recover_beta() {
        let x = DMatrix::identity(3, 3);
        let beta = [1.5, -1.5, 0.0];
        let y = response_with_noise(&x, &beta, ResponseModel::Linear, &[0.0; 3]).unwrap();
        assert_eq!(y, beta.to_vec());
    }

    #[test]
    fn single_index_shares_noise_with_linear() {
        let d = SimDesign { n: 50, m: 4, k: 2, ..SimDesign::default() };
        let sigma = make_covariance(&d).unwrap();
        let lin = generate(&d, &sigma).unwrap();
        let si = generate(&SimDesign { model: ResponseModel::SingleIndex, ..d.clone() }, &sigma).unwrap();
        assert_eq!(lin.x, si.x);
        let noise: Vec<f64> = {
            let mut rng = Stream::Noise.rng(d.seed);
            (0..d.n).map(|_| rng.sample(StandardNormal)).collect()
        };
        let expected = response_with_noise(&lin.x, &lin.beta, ResponseModel::SingleIndex, &noise).unwrap();
        assert_eq!(si.y, expected);
        let eta = &lin.x * nalgebra::DVector::from_column_slice(&lin.beta);
        for i in 0..d.n {
            assert!((lin.y[i] - eta[i] - noise[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_range_design() {
        assert!(SimDesign { k: 21, ..SimDesign::default() }.validate().is_err());
        assert!(SimDesign { rho: 1.0, ..SimDesign::default() }.validate().is_err());
        assert!(SimDesign { gamma: 1.5, ..SimDesign::default() }.validate().is_err());
    }
}

//! From an augmented design and a response to group statistics and a
//! selection.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::filter::{select_groups, SelectionResult};
use crate::knockoff::{
    estimate_covariance, group_block_s, sample_group_knockoffs, standardize_columns,
    AugmentedDesign, KnockoffSpec,
};
use crate::lasso;
use crate::net::{self, GroupImportance, TrainConfig, TrainOutcome};
use crate::partition::GroupPartition;
use crate::rng::Stream;

/// Group importance statistic used before filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Network importance statistic.
    GKnock,
    /// Group-summed Lasso coefficient difference.
    GroupLcd,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::GKnock => "gknock",
            Method::GroupLcd => "group_lcd",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gknock" => Ok(Method::GKnock),
            "group_lcd" | "group-lcd" => Ok(Method::GroupLcd),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

/// Settings shared by every statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct StatisticConfig {
    pub method: Method,
    pub train: TrainConfig,
    /// Lasso penalty; `None` uses [`lasso::default_lambda`].
    pub lambda: Option<f64>,
}

impl Default for StatisticConfig {
    fn default() -> Self {
        Self {
            method: Method::GKnock,
            train: TrainConfig::default(),
            lambda: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GKnockFit {
    pub importance: GroupImportance,
    pub training: TrainOutcome,
}

fn standardized_response(y: &[f64]) -> Result<Vec<f64>> {
    let n = y.len();
    if n < 2 {
        return Err(Error::DegenerateInput("need at least 2 responses".into()));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var > 0.0) {
        return Err(Error::DegenerateInput("response is constant".into()));
    }
    let sd = var.sqrt();
    Ok(y.iter().map(|v| (v - mean) / sd).collect())
}

/// Trains the network on the standardized design and response and reads
/// off the group statistic.
pub fn gknock_statistic(design: &AugmentedDesign, y: &[f64], cfg: &TrainConfig) -> Result<GKnockFit> {
    let design = design.standardized()?;
    let y = standardized_response(y)?;
    let init = net::init_network(design.partition(), cfg.seed);
    let training = net::train(init, &design, &y, cfg)?;
    let importance = net::group_importance(&training.weights);
    Ok(GKnockFit {
        importance,
        training,
    })
}

/// Group statistic for `cfg.method` on the standardized design.
pub fn group_statistic(design: &AugmentedDesign, y: &[f64], cfg: &StatisticConfig) -> Result<Vec<f64>> {
    match cfg.method {
        Method::GKnock => Ok(gknock_statistic(design, y, &cfg.train)?.importance.w_stat),
        Method::GroupLcd => {
            let design = design.standardized()?;
            let lambda = match cfg.lambda {
                Some(l) => l,
                None => lasso::default_lambda(&design, y)?,
            };
            lasso::group_lcd_statistic(&design, y, lambda)
        }
    }
}

/// Options for selecting groups on observed data.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOptions {
    pub q: f64,
    pub ridge: f64,
    pub seed: u64,
    pub statistic: StatisticConfig,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self {
            q: 0.2,
            ridge: 1e-3,
            seed: 0,
            statistic: StatisticConfig::default(),
        }
    }
}

/// Knockoffs for observed data: standardize, estimate Σ with a ridge, build
/// the group-block `S` and sample.
pub fn knockoffs_for_data(
    x: &DMatrix<f64>,
    partition: &GroupPartition,
    ridge: f64,
    seed: u64,
) -> Result<(AugmentedDesign, KnockoffSpec)> {
    if x.ncols() != partition.p() {
        return Err(Error::DimensionMismatch(format!(
            "data has {} columns, group map covers {}",
            x.ncols(),
            partition.p()
        )));
    }
    let z = standardize_columns(x)?;
    let sigma = estimate_covariance(&z, ridge)?;
    let spec = group_block_s(&sigma, partition)?;
    let design = sample_group_knockoffs(&z, &spec, &mut Stream::Knockoffs.rng(seed))?;
    Ok((design, spec))
}

/// The full observed-data pipeline.
pub fn select_in_memory(
    x: &DMatrix<f64>,
    y: &[f64],
    partition: &GroupPartition,
    opts: &SelectionOptions,
) -> Result<SelectionResult> {
    if !(0.0..=1.0).contains(&opts.q) {
        return Err(Error::InvalidLevel(opts.q));
    }
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "data has {} rows, response has {}",
            x.nrows(),
            y.len()
        )));
    }
    let (design, _) = knockoffs_for_data(x, partition, opts.ridge, opts.seed)?;
    let mut stat = opts.statistic.clone();
    stat.train.seed = opts.seed;
    let w = group_statistic(&design, y, &stat)?;
    select_groups(&w, opts.q)
}

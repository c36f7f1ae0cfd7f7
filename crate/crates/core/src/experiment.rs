//! Replicated simulation experiments.
//!
//! Replication `r` uses seed `seed_base + r` for everything it draws
//! (covariates, coefficients, noise, knockoffs, network init, training),
//! each on its own sub-stream, so results do not depend on scheduling.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::select_groups;
use crate::knockoff::{group_block_s, sample_group_knockoffs, KnockoffSpec};
use crate::metrics::{aggregate, fdp_tpr, Aggregate, ReplicationOutcome};
use crate::pipeline::{group_statistic, StatisticConfig};
use crate::rng::Stream;
use crate::simulate::{generate, make_covariance, SimDesign};

pub const CSV_HEADER: &str = "replicate,seed,method,n_selected,fdp,tpr,tau";

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sim: SimDesign,
    pub statistic: StatisticConfig,
    pub q: f64,
    pub replications: usize,
    pub seed_base: u64,
    pub workers: usize,
    pub output_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sim: SimDesign::default(),
            statistic: StatisticConfig::default(),
            q: 0.2,
            replications: 100,
            seed_base: 1,
            workers: 1,
            output_path: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.statistic.train.validate()?;
        if self.replications == 0 {
            return Err(Error::InvalidArgument("replications must be at least 1".into()));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(Error::InvalidLevel(self.q));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ReplicationRecord {
    pub replicate_id: usize,
    pub seed: u64,
    pub result: std::result::Result<(ReplicationOutcome, f64), String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub method: &'static str,
    pub records: Vec<ReplicationRecord>,
    /// `None` when every replication failed.
    pub aggregate: Option<Aggregate>,
    pub mean_selected: f64,
    pub failures: usize,
}

impl ExperimentReport {
    pub fn outcomes(&self) -> Vec<ReplicationOutcome> {
        self.records
            .iter()
            .filter_map(|r| r.result.as_ref().ok().map(|(o, _)| o.clone()))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.records {
            match &r.result {
                Ok((o, tau)) => writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.replicate_id, r.seed, self.method, o.n_selected, o.fdp, o.tpr, tau
                )?,
                Err(_) => writeln!(out, "{},{},{},NA,NA,NA,NA", r.replicate_id, r.seed, self.method)?,
            }
        }
        match &self.aggregate {
            Some(a) => writeln!(
                out,
                "aggregate,,{},{},{},{},",
                self.method, self.mean_selected, a.gfdr, a.power
            ),
            None => writeln!(out, "aggregate,,{},NA,NA,NA,", self.method),
        }
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn run_replication(
    cfg: &ExperimentConfig,
    spec: &KnockoffSpec,
    replicate_id: usize,
    seed: u64,
) -> Result<(ReplicationOutcome, f64)> {
    let design = SimDesign { seed, ..cfg.sim.clone() };
    let data = generate(&design, spec.sigma())?;
    let augmented = sample_group_knockoffs(&data.x, spec, &mut Stream::Knockoffs.rng(seed))?;
    let mut stat = cfg.statistic.clone();
    stat.train.seed = seed;
    let w = group_statistic(&augmented, &data.y, &stat)?;
    let selection = select_groups(&w, cfg.q)?;
    let (fdp, tpr) = fdp_tpr(&selection.selected, &data.true_groups);
    Ok((
        ReplicationOutcome {
            replicate_id,
            seed,
            n_selected: selection.selected.len(),
            fdp,
            tpr,
        },
        selection.tau,
    ))
}

/// Runs every replication on a pool of `cfg.workers` threads. Failures of
/// single replications are recorded, not propagated; the covariance and
/// knockoff construction, shared by all replications, must succeed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let sigma = make_covariance(&cfg.sim)?;
    let spec = group_block_s(&sigma, &cfg.sim.partition()?)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let records: Vec<ReplicationRecord> = pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|r| {
                let seed = cfg.seed_base.wrapping_add(r as u64);
                ReplicationRecord {
                    replicate_id: r,
                    seed,
                    result: run_replication(cfg, &spec, r, seed).map_err(|e| e.to_string()),
                }
            })
            .collect()
    });

    let outcomes: Vec<ReplicationOutcome> = records
        .iter()
        .filter_map(|r| r.result.as_ref().ok().map(|(o, _)| o.clone()))
        .collect();
    let failures = records.len() - outcomes.len();
    let mean_selected = if outcomes.is_empty() {
        f64::NAN
    } else {
        outcomes.iter().map(|o| o.n_selected as f64).sum::<f64>() / outcomes.len() as f64
    };
    let report = ExperimentReport {
        method: cfg.statistic.method.name(),
        aggregate: aggregate(&outcomes).ok(),
        records,
        mean_selected,
        failures,
    };
    if let Some(path) = &cfg.output_path {
        report.write_csv_file(path)?;
    }
    Ok(report)
}

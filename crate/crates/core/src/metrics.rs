//! Selection accuracy metrics and the hypergeometric enrichment tail.

use crate::error::{Error, Result};

/// Accuracy of one replication's selection.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub replicate_id: usize,
    pub seed: u64,
    pub n_selected: usize,
    pub fdp: f64,
    pub tpr: f64,
}

/// False discovery proportion `|Ŝ \ S₀| / max(|Ŝ|, 1)` and true positive
/// rate `|Ŝ ∩ S₀| / |S₀|`. The rate is 1 when `S₀` is empty.
pub fn fdp_tpr(selected: &[usize], truth: &[usize]) -> (f64, f64) {
    let hits = selected.iter().filter(|g| truth.contains(g)).count();
    let false_hits = selected.len() - hits;
    let fdp = false_hits as f64 / selected.len().max(1) as f64;
    let tpr = if truth.is_empty() {
        1.0
    } else {
        hits as f64 / truth.len() as f64
    };
    (fdp, tpr)
}

/// Means and standard errors across replications.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub replications: usize,
    pub gfdr: f64,
    pub gfdr_se: f64,
    pub power: f64,
    pub power_se: f64,
}

pub fn aggregate(outcomes: &[ReplicationOutcome]) -> Result<Aggregate> {
    if outcomes.is_empty() {
        return Err(Error::EmptyInput("no replication outcomes to aggregate"));
    }
    let (gfdr, gfdr_se) = mean_and_se(outcomes.iter().map(|o| o.fdp));
    let (power, power_se) = mean_and_se(outcomes.iter().map(|o| o.tpr));
    Ok(Aggregate {
        replications: outcomes.len(),
        gfdr,
        gfdr_se,
        power,
        power_se,
    })
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `ln k!` for `k = 0..=n`.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    table.push(acc);
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// `P(Q ≥ threshold)` where `Q` counts successes in `draws` draws without
/// replacement from `successes + failures` items.
pub fn hypergeom_tail(successes: u64, failures: u64, draws: u64, threshold: u64) -> Result<f64> {
    let population = successes + failures;
    if draws > population {
        return Err(Error::InvalidCounts(format!(
            "cannot draw {draws} from a population of {population}"
        )));
    }
    if threshold > draws.min(successes) {
        return Err(Error::InvalidCounts(format!(
            "threshold {threshold} exceeds min(draws, successes) = {}",
            draws.min(successes)
        )));
    }
    if threshold == 0 {
        return Ok(1.0);
    }
    let lf = ln_factorials(population as usize);
    let ln_choose = |n: u64, k: u64| lf[n as usize] - lf[k as usize] - lf[(n - k) as usize];
    let ln_total = ln_choose(population, draws);
    let lo = threshold.max(draws.saturating_sub(failures));
    let hi = draws.min(successes);
    if lo > hi {
        return Ok(0.0);
    }
    let terms: Vec<f64> = (lo..=hi)
        .map(|k| ln_choose(successes, k) + ln_choose(failures, draws - k) - ln_total)
        .collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = terms.iter().map(|t| (t - top).exp()).sum();
    Ok((top + sum.ln()).exp().min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(fdp: f64, tpr: f64) -> ReplicationOutcome {
        ReplicationOutcome {
            replicate_id: 0,
            seed: 0,
            n_selected: 1,
            fdp,
            tpr,
        }
    }

    #[test]
    fn fdp_tpr_examples() {
        assert_eq!(fdp_tpr(&[1, 2], &[1, 2]), (0.0, 1.0));
        assert_eq!(fdp_tpr(&[], &[1, 2]), (0.0, 0.0));
        assert_eq!(fdp_tpr(&[1, 2, 3, 4], &[1, 2]), (0.5, 1.0));
        assert_eq!(fdp_tpr(&[3], &[]), (1.0, 1.0));
    }

    #[test]
    fn aggregate_examples() {
        let a = aggregate(&[outcome(0.25, 0.5)]).unwrap();
        assert_eq!((a.gfdr, a.gfdr_se, a.power, a.power_se), (0.25, 0.0, 0.5, 0.0));
        let a = aggregate(&[outcome(0.1, 1.0), outcome(0.3, 1.0)]).unwrap();
        assert!((a.gfdr - 0.2).abs() < 1e-15);
        assert!(matches!(aggregate(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn aggregate_of_bounded_values_is_bounded() {
        let outs: Vec<_> = (0..100).map(|i| outcome((i % 7) as f64 / 35.0, 1.0)).collect();
        assert!(aggregate(&outs).unwrap().gfdr <= 0.2);
    }

    #[test]
    fn hypergeom_edge_cases() {
        assert_eq!(hypergeom_tail(21, 85, 26, 0).unwrap(), 1.0);
        assert!(hypergeom_tail(21, 85, 200, 1).is_err());
        assert!(hypergeom_tail(5, 85, 26, 6).is_err());
        assert!((hypergeom_tail(3, 0, 3, 3).unwrap() - 1.0).abs() < 1e-15);
    }
}

//! Knockoff+ thresholding and group selection.

use crate::error::{Error, Result};

/// Outcome of filtering a statistic vector at level `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub w: Vec<f64>,
    /// `f64::INFINITY` when no threshold satisfies the ratio condition.
    pub tau: f64,
    /// Selected indices in ascending order.
    pub selected: Vec<usize>,
    pub q: f64,
}

impl SelectionResult {
    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }
}

/// `τ = min{t > 0 : (1 + #{j : W_j ≤ −t}) / #{j : W_j ≥ t} ≤ q}` and the
/// selection `{j : W_j ≥ τ}`.
///
/// The ratio only changes at the magnitudes `|W_j|`, so those are the only
/// candidates examined. Zero entries are never counted on either side.
pub fn knockoff_threshold(w: &[f64], q: f64) -> Result<SelectionResult> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidLevel(q));
    }
    if let Some(j) = w.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "statistic W[{j}] = {} is not finite",
            w[j]
        )));
    }

    // Walk candidate thresholds from the largest magnitude down, tracking how
    // many positives and negatives sit at or beyond the current one.
    let mut mags: Vec<f64> = w.iter().filter(|v| **v != 0.0).map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags.dedup();

    let mut by_mag: Vec<f64> = w.iter().copied().filter(|v| *v != 0.0).collect();
    by_mag.sort_by(|a, b| b.abs().total_cmp(&a.abs()));

    let mut tau = f64::INFINITY;
    let (mut pos, mut neg) = (0usize, 0usize);
    let mut k = 0;
    for &t in &mags {
        while k < by_mag.len() && by_mag[k].abs() >= t {
            if by_mag[k] > 0.0 {
                pos += 1;
            } else {
                neg += 1;
            }
            k += 1;
        }
        if pos > 0 && (1 + neg) as f64 / pos as f64 <= q {
            tau = t;
        }
    }

    let selected = if tau.is_finite() {
        (0..w.len()).filter(|&j| w[j] >= tau).collect()
    } else {
        Vec::new()
    };
    Ok(SelectionResult {
        w: w.to_vec(),
        tau,
        selected,
        q,
    })
}

/// Applies the knockoff+ filter to group statistics.
pub fn select_groups(w: &[f64], q: f64) -> Result<SelectionResult> {
    knockoff_threshold(w, q)
}

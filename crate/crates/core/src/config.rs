//! Flat key-value experiment configuration.
//!
//! Grammar, one setting per line:
//!
//! ```text
//! # comment
//! key = value
//! ```
//!
//! Blank lines and `#` comments are ignored; keys are case-sensitive and may
//! appear once. Recognized keys:
//!
//! | key | meaning |
//! |-----|---------|
//! | `n`, `m`, `group_size`, `k` | sample size, groups, features per group, signal groups |
//! | `amplitude`, `rho`, `gamma` | coefficient magnitude, within-group correlation, between-group scale |
//! | `model` | `linear` or `single_index` |
//! | `method` | `gknock` or `group_lcd` |
//! | `q`, `replications`, `seed` | target level, replication count, seed base |
//! | `learning_rate`, `l1_strength`, `epochs`, `batch_size`, `patience` | network training |
//! | `lambda` | Lasso penalty for `group_lcd` (`auto` for the default) |
//! | `workers` | worker threads |
//! | `out` | result CSV path |

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;

/// Applies one `key = value` setting. `line` is for error messages.
pub fn apply_setting(cfg: &mut ExperimentConfig, key: &str, value: &str, origin: &str, line: usize) -> Result<()> {
    fn parse<T: FromStr>(value: &str, key: &str, origin: &str, line: usize) -> Result<T> {
        value.parse().map_err(|_| Error::Parse {
            path: origin.to_string(),
            line,
            message: format!("invalid value '{value}' for '{key}'"),
        })
    }
    let p = |v: &str| -> Result<f64> { parse(v, key, origin, line) };
    let u = |v: &str| -> Result<usize> { parse(v, key, origin, line) };
    match key {
        "n" => cfg.sim.n = u(value)?,
        "m" => cfg.sim.m = u(value)?,
        "group_size" => cfg.sim.group_size = u(value)?,
        "k" => cfg.sim.k = u(value)?,
        "amplitude" => cfg.sim.amplitude = p(value)?,
        "rho" => cfg.sim.rho = p(value)?,
        "gamma" => cfg.sim.gamma = p(value)?,
        "model" => cfg.sim.model = value.parse()?,
        "method" => cfg.statistic.method = value.parse()?,
        "q" => cfg.q = p(value)?,
        "replications" => cfg.replications = u(value)?,
        "seed" => cfg.seed_base = parse(value, key, origin, line)?,
        "learning_rate" => cfg.statistic.train.learning_rate = p(value)?,
        "l1_strength" => cfg.statistic.train.l1_strength = p(value)?,
        "epochs" => cfg.statistic.train.epochs = u(value)?,
        "batch_size" => cfg.statistic.train.batch_size = u(value)?,
        "patience" => cfg.statistic.train.patience = u(value)?,
        "lambda" => {
            cfg.statistic.lambda = if value == "auto" { None } else { Some(p(value)?) }
        }
        "workers" => cfg.workers = u(value)?,
        "out" => cfg.output_path = Some(PathBuf::from(value)),
        other => {
            return Err(Error::Parse {
                path: origin.to_string(),
                line,
                message: format!("unknown key '{other}'"),
            })
        }
    }
    Ok(())
}

/// Applies every setting in `text` on top of `cfg`.
pub fn apply_str(cfg: &mut ExperimentConfig, text: &str, origin: &str) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Parse {
                path: origin.to_string(),
                line,
                message: format!("expected 'key = value', got '{content}'"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(Error::Parse {
                path: origin.to_string(),
                line,
                message: format!("duplicate key '{key}'"),
            });
        }
        apply_setting(cfg, key, value, origin, line)?;
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = ExperimentConfig::default();
    apply_str(&mut cfg, &text, &path.display().to_string())?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::Method;
    use crate::simulate::ResponseModel;

    #[test]
    fn parses_settings_and_comments() {
        let mut cfg = ExperimentConfig::default();
        apply_str(
            &mut cfg,
            "# desk\nn = 300\nmodel = single_index # trailing\n\nmethod=group_lcd\nlambda = auto\nq = 0.1\n",
            "t",
        )
        .unwrap();
        assert_eq!(cfg.sim.n, 300);
        assert_eq!(cfg.sim.model, ResponseModel::SingleIndex);
        assert_eq!(cfg.statistic.method, Method::GroupLcd);
        assert_eq!(cfg.statistic.lambda, None);
        assert_eq!(cfg.q, 0.1);
    }

    #[test]
    fn reports_line_of_bad_entry() {
        let mut cfg = ExperimentConfig::default();
        let err = apply_str(&mut cfg, "n = 3\n\nrho = lots\n", "f.conf").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = apply_str(&mut ExperimentConfig::default(), "bogus = 1", "f").unwrap_err();
        assert!(err.to_string().contains("unknown key"));
        let err = apply_str(&mut ExperimentConfig::default(), "n = 1\nn = 2", "f").unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }
}

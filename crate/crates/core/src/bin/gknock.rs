use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gknock::config;
use gknock::experiment::{run_experiment, ExperimentConfig};
use gknock::io::{
    partition_from_map, read_group_map, read_response, read_table, write_selection, write_table,
};
use gknock::metrics::hypergeom_tail;
use gknock::pipeline::{knockoffs_for_data, select_in_memory, SelectionOptions};
use gknock::{Error, Method};

#[derive(Parser)]
#[command(name = "gknock", version, about = "Group knockoff feature selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replicated simulation experiment.
    Simulate(SimulateArgs),
    /// Select groups on CSV data.
    Select(SelectArgs),
    /// Write a knockoff copy of a CSV design.
    Knockoffs(KnockoffArgs),
    /// Probability of at least THRESHOLD successes in a random draw.
    Hypergeom(HypergeomArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "LEVEL")]
    q: Option<f64>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_parser = ["gknock", "group_lcd"])]
    method: Option<String>,
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    reps: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct DataArgs {
    /// Design CSV with a header of feature names.
    #[arg(long, value_name = "PATH")]
    x: PathBuf,
    /// `feature,group` CSV.
    #[arg(long, value_name = "PATH")]
    groups: PathBuf,
    #[arg(long, value_name = "VAL", default_value_t = 1e-3)]
    ridge: f64,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Single-column response CSV.
    #[arg(long, value_name = "PATH")]
    y: PathBuf,
    /// Training settings; only training and `lambda` keys are used.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct KnockoffArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_name = "N", default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HypergeomArgs {
    #[arg(long)]
    successes: u64,
    #[arg(long)]
    failures: u64,
    #[arg(long)]
    draws: u64,
    #[arg(long)]
    threshold: u64,
}

fn exit_code(err: &Error) -> u8 {
    if err.is_numerical() {
        3
    } else {
        2
    }
}

fn experiment_config(path: Option<&Path>, common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match path {
        Some(p) => config::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(q) = common.q {
        cfg.q = q;
    }
    if let Some(seed) = common.seed {
        cfg.seed_base = seed;
    }
    if let Some(m) = &common.method {
        cfg.statistic.method = m.parse::<Method>()?;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(out) = &common.out {
        cfg.output_path = Some(out.clone());
    }
    Ok(cfg)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).map_err(|e| Error::Io {
                path: p.display().to_string(),
                source: e,
            })?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_err(path: Option<&Path>, e: std::io::Error) -> Error {
    Error::Io {
        path: path.map_or("<stdout>".into(), |p| p.display().to_string()),
        source: e,
    }
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let mut cfg = experiment_config(args.config.as_deref(), &args.common)?;
    if let Some(r) = args.reps {
        cfg.replications = r;
    }
    let report = run_experiment(&cfg)?;
    if cfg.output_path.is_none() {
        report
            .write_csv(std::io::stdout().lock())
            .map_err(|e| write_err(None, e))?;
    }
    match &report.aggregate {
        Some(a) => eprintln!(
            "{}: gFDR {:.3} (se {:.3}), power {:.3} (se {:.3}), {} replications, {} failed",
            report.method, a.gfdr, a.gfdr_se, a.power, a.power_se, a.replications, report.failures
        ),
        None => eprintln!("{}: every replication failed", report.method),
    }
    for r in &report.records {
        if let Err(msg) = &r.result {
            eprintln!("replicate {} (seed {}): {msg}", r.replicate_id, r.seed);
        }
    }
    Ok(())
}

fn load_design(data: &DataArgs) -> Result<(nalgebra::DMatrix<f64>, Vec<String>, gknock::GroupPartition, Vec<String>), Error> {
    let table = read_table(&data.x)?;
    let map = read_group_map(&data.groups)?;
    let (partition, ids) = partition_from_map(&table.names, &map)?;
    Ok((table.values, table.names, partition, ids))
}

fn select(args: SelectArgs) -> Result<(), Error> {
    let (x, _, partition, ids) = load_design(&args.data)?;
    let y = read_response(&args.y)?;
    let cfg = experiment_config(args.config.as_deref(), &args.common)?;
    let opts = SelectionOptions {
        q: cfg.q,
        ridge: args.data.ridge,
        seed: args.common.seed.unwrap_or(0),
        statistic: cfg.statistic,
    };
    let result = select_in_memory(&x, &y, &partition, &opts)?;
    let out = args.common.out.as_deref();
    let mut w = output(out)?;
    write_selection(&mut w, &ids, &result)
        .and_then(|_| w.flush())
        .map_err(|e| write_err(out, e))?;
    eprintln!(
        "selected {} of {} groups at q = {}",
        result.selected.len(),
        ids.len(),
        result.q
    );
    Ok(())
}

fn knockoffs(args: KnockoffArgs) -> Result<(), Error> {
    let (x, names, partition, _) = load_design(&args.data)?;
    let (design, _) = knockoffs_for_data(&x, &partition, args.data.ridge, args.seed)?;
    let names: Vec<String> = names.iter().map(|n| format!("{n}_knockoff")).collect();
    let out = args.out.as_deref();
    let mut w = output(out)?;
    write_table(&mut w, &names, design.x_knock())
        .and_then(|_| w.flush())
        .map_err(|e| write_err(out, e))
}

fn hypergeom(args: HypergeomArgs) -> Result<(), Error> {
    let p = hypergeom_tail(args.successes, args.failures, args.draws, args.threshold)?;
    println!("{p}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Select(a) => select(a),
        Command::Knockoffs(a) => knockoffs(a),
        Command::Hypergeom(a) => hypergeom(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

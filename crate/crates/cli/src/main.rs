use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedmoeac::harness::experiment::{
    compare_runs, parse_reference, read_points_csv, run_experiment, write_run,
};
use fedmoeac::harness::ExperimentConfig;
use fedmoeac::metrics::hypervolume;
use fedmoeac::{Error, ErrorKind};

/// Multi-objective tuning of federated learning: global error,
/// communication overhead and privacy budget.
///
/// Log verbosity follows RUST_LOG (default: info).
#[derive(Parser)]
#[command(name = "fedmoeac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write run.json, fronts.csv and hv.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run two configs over the same seeds and compare hypervolumes.
    Compare {
        #[arg(long)]
        config_a: PathBuf,
        #[arg(long)]
        config_b: PathBuf,
        /// Inclusive range `a..b` (or `a..=b`) or a comma list.
        #[arg(long, value_parser = parse_seeds)]
        seeds: Seeds,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hypervolume of the points in a CSV (three columns, optional header).
    Hv {
        #[arg(long)]
        points: PathBuf,
        #[arg(long = "ref", default_value = "1,1,1")]
        reference: String,
    },
    /// Parse and check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Debug)]
struct Seeds(Vec<u64>);

fn parse_seeds(text: &str) -> Result<Seeds, String> {
    let bad = || format!("expected `a..b`, `a..=b` or `s1,s2,...`, got {text:?}");
    if let Some((a, b)) = text.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok(Seeds((a..=b).collect()));
    }
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect::<Result<_, _>>()
        .map(Seeds)
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 1,
        ErrorKind::Data => 2,
        ErrorKind::Runtime => 3,
    }
}

/// A config file that cannot be read is a config error, not a data error.
fn load_config(path: &std::path::Path) -> Result<ExperimentConfig, Error> {
    ExperimentConfig::load(path).map_err(|e| match e {
        Error::Io { .. } => Error::Config(e.to_string()),
        other => other,
    })
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { config, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            let (record, timing) = run_experiment(&cfg)?;
            write_run(&record, Some(&timing), &cfg.output_dir)?;
            println!(
                "final hypervolume {:.6}; wrote {}",
                record.final_hv(),
                cfg.output_dir.display()
            );
        }
        Command::Compare {
            config_a,
            config_b,
            seeds,
            out,
        } => {
            let a = load_config(&config_a)?;
            let b = load_config(&config_b)?;
            let c = compare_runs(&a, &b, &seeds.0, Some(&out))?;
            println!(
                "median final hypervolume: a ({}) {:.6}, b ({}) {:.6}; a ahead on {} of {} seeds",
                a.algorithm,
                c.median_final_hv[0],
                b.algorithm,
                c.median_final_hv[1],
                c.a_wins,
                c.seeds.len()
            );
        }
        Command::Hv { points, reference } => {
            let reference = parse_reference(&reference)?;
            let pts = read_points_csv(&points)?;
            println!("{}", hypervolume(&pts, reference));
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!("{}: ok ({} with seed {})", config.display(), cfg.algorithm, cfg.seed);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges_are_inclusive() {
        assert_eq!(parse_seeds("0..4").unwrap().0, vec![0, 1, 2, 3, 4]);
        assert_eq!(parse_seeds("2..=3").unwrap().0, vec![2, 3]);
        assert_eq!(parse_seeds("7, 1,3").unwrap().0, vec![7, 1, 3]);
        assert_eq!(parse_seeds("5").unwrap().0, vec![5]);
        assert!(parse_seeds("4..1").is_err());
        assert!(parse_seeds("a..b").is_err());
        assert!(parse_seeds("").is_err());
    }
}

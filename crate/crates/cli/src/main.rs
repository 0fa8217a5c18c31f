use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use irs_relay::experiments::{emit_csv, run_sweep, write_csv, Scenario, SweepVariable};
use irs_relay::schemes::SchemeId;

#[derive(Parser)]
#[command(name = "irs-relay", version, about = "Rate simulations for relay and surface assisted MIMO links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one scheme on one channel drop and print the rate breakdown as JSON.
    Evaluate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "hybrid_optimized")]
        scheme: String,
        /// Drop index within the seeded sequence.
        #[arg(long, default_value_t = 0)]
        drop: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte Carlo sweep of one scenario parameter, written as CSV.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// resolution_bits, source_power_fraction, irs_position_y or irs_element_count
        #[arg(long)]
        var: String,
        /// Comma-separated sweep values.
        #[arg(long)]
        values: String,
        /// Comma-separated scheme names; all schemes when omitted.
        #[arg(long)]
        schemes: Option<String>,
        #[arg(long)]
        drops: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; all cores when omitted.
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn load(config: Option<&PathBuf>) -> Result<Scenario> {
    match config {
        Some(path) => Scenario::load(path).with_context(|| format!("reading config {}", path.display())),
        None => Ok(Scenario::default()),
    }
}

fn parse_list<T>(text: &str, what: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(s).with_context(|| format!("bad {what} '{s}'")))
        .collect()
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Evaluate {
            config,
            scheme,
            drop,
            seed,
        } => {
            let mut scenario = load(config.as_ref())?;
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            scenario.validate()?;
            let scheme: SchemeId = scheme.parse()?;
            let breakdown = scenario.evaluate_drop(drop, &[scheme])?.remove(0);
            println!("{}", serde_json::to_string_pretty(&breakdown)?);
        }
        Command::Sweep {
            config,
            var,
            values,
            schemes,
            drops,
            seed,
            out,
            workers,
        } => {
            let mut scenario = load(config.as_ref())?;
            if let Some(drops) = drops {
                scenario.drops = drops;
            }
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            let variable: SweepVariable = var.parse()?;
            let values = parse_list(&values, "value", |s| Ok(s.parse::<f64>()?))?;
            if values.is_empty() {
                bail!("--values needs at least one number");
            }
            let schemes = match schemes {
                Some(list) => parse_list(&list, "scheme", |s| Ok(s.parse::<SchemeId>()?))?,
                None => SchemeId::ALL.to_vec(),
            };
            let result = run_sweep(&scenario, variable, &values, &schemes, workers)?;
            match out {
                Some(path) => write_csv(&result, &path).with_context(|| format!("writing {}", path.display()))?,
                None => emit_csv(&result, std::io::stdout().lock())?,
            }
        }
    }
    Ok(())
}

//! `lowdelay` — packet-erasure FEC workbench front-end.
//!
//! Analytics (`analyze`), Monte Carlo simulation (`simulate`, `sweep`,
//! `compare`) and the oracle cross-check battery (`validate`). Tables land
//! on stdout as CSV, or as CSV + JSON mirror under `--out DIR`.
//!
//! Set `LOWDELAY_WORKERS` to cap the simulation worker count.

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use lowdelay_cli::*;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "lowdelay", version, about = "packet-erasure FEC workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct OutArg {
    /// Directory for <name>.csv and <name>.json (stdout CSV when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form analytics.
    Analyze {
        #[command(subcommand)]
        what: Analyze,
    },
    /// Run a scenario file.
    Simulate {
        scenario: PathBuf,
        /// Override the scenario's base seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario's replication count.
        #[arg(long)]
        reps: Option<u32>,
        /// Slot duration in milliseconds; adds a wall-clock delay column.
        #[arg(long)]
        slot_ms: Option<f64>,
        #[command(flatten)]
        out: OutArg,
    },
    /// Sweep one axis of a scenario (rate | epsilon | c | block).
    Sweep {
        scenario: PathBuf,
        #[arg(long)]
        axis: String,
        /// Comma list or inclusive range, e.g. `2,5,10` or `1..5`.
        #[arg(long)]
        values: String,
        #[command(flatten)]
        out: OutArg,
    },
    /// Stream vs grouped vs block at matched rate, matched seeds.
    Compare {
        scenario: PathBuf,
        #[command(flatten)]
        out: OutArg,
    },
    /// Run the oracle cross-check battery; nonzero exit on any mismatch.
    Validate {
        /// Comma-separated subset of check names.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
    },
}

#[derive(Subcommand)]
enum Analyze {
    /// Busy-time moments and the mean in-order delay bound.
    Busy {
        /// One l, a comma list, or a range like 2..10.
        #[arg(long, default_value = "5")]
        l: String,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1e-12)]
        tail_tol: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// The truncated busy-time distribution itself.
    Pmf {
        #[arg(long, default_value_t = 5)]
        l: u32,
        /// Grouped shape: interval length (requires --c).
        #[arg(long)]
        lg: Option<u32>,
        /// Grouped shape: coded packets per interval.
        #[arg(long)]
        c: Option<u32>,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1e-12)]
        tail_tol: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Grouped-variant delay vs burst size at fixed rate.
    Group {
        /// Stream shape l (rate (l-1)/l); exclusive with --rate.
        #[arg(long)]
        l: Option<u32>,
        /// Code rate, converted to l = 1/(1-rate).
        #[arg(long)]
        rate: Option<f64>,
        #[arg(long)]
        eps: f64,
        /// Burst sizes, e.g. `1..5`.
        #[arg(long, default_value = "1..5")]
        c: String,
        #[command(flatten)]
        out: OutArg,
    },
    /// Decoder arithmetic per information packet.
    Cost {
        #[arg(long, default_value = "5")]
        l: String,
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Decoding-failure bounds (add --table for the field-size grid).
    Failure {
        #[arg(long, default_value_t = 5)]
        l: u32,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 256.0)]
        q: f64,
        /// Exact numerical evaluation up to this busy length.
        #[arg(long)]
        kmax: Option<u32>,
        /// Emit the closed-form grid over l in {5,6,7}, q = 2^(8x).
        #[arg(long)]
        table: bool,
        #[command(flatten)]
        out: OutArg,
    },
    /// Full-rank probability bounds per busy length.
    Rank {
        #[arg(long, default_value_t = 256.0)]
        q: f64,
        #[arg(long, default_value_t = 8)]
        kmax: u32,
        #[command(flatten)]
        out: OutArg,
    },
    /// Lower bound on Pr(GT > r0) for an n-slot stream.
    Throughput {
        #[arg(long, default_value_t = 5)]
        l: u32,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        r0: f64,
        #[command(flatten)]
        out: OutArg,
    },
}

fn configure_workers() {
    if let Ok(value) = std::env::var("LOWDELAY_WORKERS") {
        if let Ok(n) = value.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        } else {
            eprintln!("ignoring unparsable LOWDELAY_WORKERS={value}");
        }
    }
}

fn main() -> Result<()> {
    configure_workers();
    let cli = Cli::parse();
    match cli.command {
        Command::Analyze { what } => match what {
            Analyze::Busy { l, eps, tail_tol, out } => {
                cmd_analyze_busy(&parse_u32_list(&l)?, eps, tail_tol, out.out.as_deref())?;
            }
            Analyze::Pmf { l, lg, c, eps, tail_tol, out } => {
                let group = match (lg, c) {
                    (Some(lg), Some(c)) => Some((lg, c)),
                    (None, None) => None,
                    _ => anyhow::bail!("--lg and --c must be given together"),
                };
                cmd_analyze_pmf(l, group, eps, tail_tol, out.out.as_deref())?;
            }
            Analyze::Group { l, rate, eps, c, out } => {
                let l = match (l, rate) {
                    (Some(l), None) => l,
                    (None, Some(rate)) => {
                        if !(0.0..1.0).contains(&rate) {
                            anyhow::bail!("rate must be in (0, 1)");
                        }
                        (1.0 / (1.0 - rate)).round() as u32
                    }
                    _ => anyhow::bail!("give exactly one of --l or --rate"),
                };
                cmd_analyze_group(l, eps, &parse_u32_list(&c)?, out.out.as_deref())?;
            }
            Analyze::Cost { l, eps, out } => {
                cmd_analyze_cost(&parse_u32_list(&l)?, eps, out.out.as_deref())?;
            }
            Analyze::Failure { l, eps, q, kmax, table, out } => {
                if table {
                    cmd_analyze_failure_table(eps, out.out.as_deref())?;
                } else {
                    cmd_analyze_failure(l, eps, q, kmax, out.out.as_deref())?;
                }
            }
            Analyze::Rank { q, kmax, out } => {
                cmd_analyze_rank(q, kmax, out.out.as_deref())?;
            }
            Analyze::Throughput { l, eps, n, r0, out } => {
                cmd_analyze_throughput(l, eps, n, r0, out.out.as_deref())?;
            }
        },
        Command::Simulate { scenario, seed, reps, slot_ms, out } => {
            cmd_simulate(&scenario, seed, reps, slot_ms, out.out.as_deref())?;
        }
        Command::Sweep { scenario, axis, values, out } => {
            cmd_sweep(&scenario, &axis, &values, out.out.as_deref())?;
        }
        Command::Compare { scenario, out } => {
            cmd_compare(&scenario, out.out.as_deref())?;
        }
        Command::Validate { only } => {
            let passed = cmd_validate(only.as_deref())?;
            if !passed {
                std::process::exit(1);
            }
        }
    }
    Ok(())
}

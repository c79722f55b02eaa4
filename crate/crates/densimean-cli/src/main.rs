//! Command-line front end for the densimean library: mean-value ladders,
//! density tables, brute-force field oracles, and the bound checks, all
//! emitted as CSV or single-line JSON with the run parameters embedded.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod cachefile;
mod commands;
mod config;
mod report;

use commands::{DensityFamily, MeanFamily};
use config::{Format, Overrides, RunConfig};

/// Error carrying the process exit code: 2 for usage and domain problems,
/// 3 when a budget or cap ran out, 1 for anything that indicates a bug.
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub code: u8,
}

impl CliError {
    pub fn usage(message: String) -> Self {
        CliError { message, code: 2 }
    }

    pub fn resource(message: String) -> Self {
        CliError { message, code: 3 }
    }

    pub fn internal(message: String) -> Self {
        CliError { message, code: 1 }
    }
}

impl From<densimean::Error> for CliError {
    fn from(e: densimean::Error) -> Self {
        let code = match &e {
            densimean::Error::Domain(_) => 2,
            densimean::Error::FactorBudget { .. } | densimean::Error::Resource(_) => 3,
            _ => 1,
        };
        CliError {
            message: e.to_string(),
            code,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "densimean",
    version,
    about = "Mean values of divisor-product densities over finite fields"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalFlags {
    /// TOML config file; flags given on the command line win over it
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Factorization cache file (JSON lines, append-only)
    #[arg(long, global = true, value_name = "FILE")]
    cache_path: Option<PathBuf>,
    /// Output format
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Iteration budget for the factoring engine; hard composites burn the
    /// whole budget before the row is skipped, so sweeps over unfactorable
    /// inputs want this small
    #[arg(long, global = true, value_name = "N")]
    factor_budget: Option<u64>,
    /// Largest divisor list the engine will materialize
    #[arg(long, global = true, value_name = "N")]
    divisor_cap: Option<u64>,
    /// Largest field the brute-force oracle will enumerate
    #[arg(long, global = true, value_name = "N")]
    enum_cap: Option<u64>,
    /// Seed for the factoring engine's internal randomness
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Ladder means A_t, the truncated log-mean lower bound, and empirical
    /// window diagnostics for one density family
    Mean {
        /// Which multiplicative density to average
        #[arg(long, value_enum)]
        family: MeanFamily,
        /// Prime power base (primitive and normal families only)
        #[arg(long)]
        q: Option<u64>,
        /// Deepest ladder index to compute
        #[arg(long)]
        t_max: usize,
        /// Moment order; 1 is the plain mean
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Truncation depth for the geometric lower bound
        /// (default 1000, or 50 for the primitive family)
        #[arg(long)]
        log_mean_depth: Option<u64>,
        /// Evaluate the empirical average up to x; repeatable
        #[arg(long = "empirical-x", value_name = "X")]
        empirical_xs: Vec<u64>,
    },
    /// Per-degree density table for a fixed base field
    Density {
        #[arg(long, value_enum)]
        family: DensityFamily,
        /// Prime power base
        #[arg(long)]
        q: u64,
        /// Inclusive degree range, written A..B
        #[arg(long, value_name = "A..B")]
        n_range: String,
    },
    /// Count primitive and normal elements of one extension by brute force
    /// and compare against the closed-form counts
    Oracle {
        /// Prime power base
        #[arg(long)]
        q: u64,
        /// Extension degree
        #[arg(long)]
        n: u32,
    },
    /// Inequality checks backing the density estimates
    #[command(subcommand)]
    Bounds(BoundsCommand),
    /// Divisibility ladder witnessing that the primitive-element mean
    /// descends below any fixed step
    Witness {
        /// Prime power base
        #[arg(long)]
        q: u64,
        /// Number of descent steps
        #[arg(long)]
        k_max: usize,
    },
    /// Inspect or reset the on-disk factorization cache
    #[command(subcommand)]
    Cache(CacheCommand),
}

#[derive(Subcommand)]
enum BoundsCommand {
    /// Verify the divisor-count ceiling m^(1.1/log log m) by sieve
    Sigma0 {
        /// Largest m to check
        #[arg(long, default_value_t = 1_000_000)]
        max: u64,
    },
    /// Check the normal-element ladder means against the one-over-root-q
    /// window that holds for q at least 4
    NormalBig {
        #[arg(long)]
        q: u64,
        #[arg(long, default_value_t = 8)]
        t_max: usize,
    },
    /// Second-moment estimate against the closed-form variance cap
    Variance {
        #[arg(long)]
        q: u64,
        #[arg(long, default_value_t = 8)]
        t_max: usize,
    },
    /// Threshold/fraction pair: at least this fraction of degrees has
    /// density above the threshold
    Proportion {
        #[arg(long)]
        q: u64,
        /// Distance below the window floor (default: one over root q)
        #[arg(long)]
        margin: Option<f64>,
    },
    /// Totient-ratio sums over divisors with a fixed multiplicative order
    OrderSums {
        #[arg(long)]
        q: u64,
        #[arg(long)]
        j_max: u64,
    },
}

#[derive(Subcommand)]
enum CacheCommand {
    /// Report the cache location and entry count
    Stats,
    /// Delete the cache file and forget its contents
    Clear,
}

fn parse_range(s: &str) -> Result<(u64, u64), CliError> {
    let err = || CliError::usage(format!("range must look like A..B with 1 <= A <= B, got {s:?}"));
    let (a, b) = s.split_once("..").ok_or_else(err)?;
    let lo: u64 = a.trim().parse().map_err(|_| err())?;
    let hi: u64 = b.trim().parse().map_err(|_| err())?;
    if lo == 0 || hi < lo {
        return Err(err());
    }
    Ok((lo, hi))
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let g = &cli.global;
    let file_config = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let overrides = Overrides {
        factor_budget: g.factor_budget,
        divisor_cap: g.divisor_cap,
        enum_cap: g.enum_cap,
        seed: g.seed,
        cache_path: g.cache_path.clone(),
        format: g.format,
    };
    let settings = config::resolve(overrides, file_config)?;

    // the cache subcommands read or delete the file themselves
    let preload = !matches!(cli.command, Command::Cache(_));
    let on_disk = if preload {
        cachefile::load(&settings.cache_path)
    } else {
        Default::default()
    };

    let result = match cli.command {
        Command::Mean {
            family,
            q,
            t_max,
            alpha,
            log_mean_depth,
            empirical_xs,
        } => commands::mean(
            family,
            q,
            t_max,
            alpha,
            log_mean_depth,
            empirical_xs,
            &settings,
        ),
        Command::Density { family, q, n_range } => {
            let range = parse_range(&n_range)?;
            commands::density(family, q, range, &settings)
        }
        Command::Oracle { q, n } => commands::oracle(q, n, &settings),
        Command::Bounds(b) => match b {
            BoundsCommand::Sigma0 { max } => commands::bounds_sigma0(max, &settings),
            BoundsCommand::NormalBig { q, t_max } => {
                commands::bounds_normal_big(q, t_max, &settings)
            }
            BoundsCommand::Variance { q, t_max } => commands::bounds_variance(q, t_max, &settings),
            BoundsCommand::Proportion { q, margin } => {
                commands::bounds_proportion(q, margin, &settings)
            }
            BoundsCommand::OrderSums { q, j_max } => {
                commands::bounds_order_sums(q, j_max, &settings)
            }
        },
        Command::Witness { q, k_max } => commands::witness(q, k_max, &settings),
        Command::Cache(CacheCommand::Stats) => commands::cache_stats(&settings),
        Command::Cache(CacheCommand::Clear) => commands::cache_clear(&settings),
    };

    // factorizations already paid for are worth keeping even when the
    // command itself failed partway through
    if preload {
        if let Err(e) = cachefile::save_new(&settings.cache_path, &on_disk) {
            eprintln!("warning: could not update cache: {}", e.message);
        }
    }

    let report = result?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match settings.format {
        Format::Csv => report.emit_csv(&mut out)?,
        Format::Json => report.emit_json(&mut out)?,
    }
    Ok(report.exit)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::parse_range;

    #[test]
    fn ranges_parse_inclusively() {
        assert_eq!(parse_range("1..5").unwrap(), (1, 5));
        assert_eq!(parse_range(" 3 .. 9 ").unwrap(), (3, 9));
        assert_eq!(parse_range("7..7").unwrap(), (7, 7));
        for bad in ["5..2", "0..3", "x..y", "4", "..", "3..", "1...4"] {
            let err = parse_range(bad).unwrap_err();
            assert_eq!(err.code, 2, "{bad} should be a usage error");
        }
    }
}

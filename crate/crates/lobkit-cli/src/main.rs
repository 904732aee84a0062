//! `lobkit`: trade-tape accounting, order-book calculus, diffusion-limit
//! checks, hedging/market-making solvers and covariation tests from the
//! command line. All commands are deterministic given their configuration
//! and seed; outputs are JSON reports and CSV series for plotting.

// `!(x > 0.0)`-style guards deliberately reject NaN together with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod selfcheck;

use clap::{Parser, Subcommand};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "lobkit", version, about = "Self-financing calculus for limit-order-book markets")]
struct Cli {
    /// Seed overriding any seed found in configuration files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the Monte Carlo checks (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a tape CSV, filter flagged executions and write the
    /// trade-clock series.
    Ingest {
        #[arg(long)]
        tape: String,
        #[arg(long)]
        out: String,
    },
    /// Count microstructure-inequality violations on a series.
    Validate {
        #[arg(long)]
        series: String,
        #[arg(long)]
        out: Option<String>,
    },
    /// Reconstruct wealth paths under the self-financing models and compare
    /// them with the ledger.
    Reconstruct {
        #[arg(long)]
        series: String,
        /// proposed | classical | frictionless | general
        #[arg(long, default_value = "proposed")]
        model: String,
        /// Order book JSON (single book or array, one per trade) backing the
        /// general model's cost functions.
        #[arg(long)]
        book_costs: Option<String>,
        #[arg(long)]
        out: Option<String>,
        /// CSV with the ledger and model wealth paths.
        #[arg(long)]
        out_csv: Option<String>,
    },
    /// Toxicity indexes over a window of the tape.
    Toxicity {
        #[arg(long)]
        series: String,
        /// Inclusive increment range `a:b`; defaults to the whole tape.
        #[arg(long)]
        window: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Run one diffusion-limit check from a configuration file.
    Simulate {
        #[arg(long)]
        config: String,
        /// spread-limit | recovery | general-cost | supply-demand | flat-book
        #[arg(long)]
        check: String,
        #[arg(long)]
        out: Option<String>,
    },
    /// Solve the replication equation and classify the hedging order types.
    Hedge {
        /// `call:K`, `put:K` or `custom:FILE` (CSV of price,value knots).
        #[arg(long)]
        payoff: String,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.2)]
        sigma: f64,
        /// proportional (σ·p) or constant (σ).
        #[arg(long, default_value = "proportional")]
        sigma_mode: String,
        #[arg(long, default_value_t = 1.0)]
        maturity: f64,
        /// `pmin:pmax:np:nt`, or `auto` for ±8 effective deviations.
        #[arg(long, default_value = "auto")]
        grid: String,
        #[arg(long, default_value_t = 100.0)]
        spot: f64,
        #[arg(long)]
        out: Option<String>,
        /// CSV of the t = 0 slice: price, value, delta, gamma, theta, l.
        #[arg(long)]
        out_csv: Option<String>,
    },
    /// Optimal market-maker spread along a price/volatility path.
    Mm {
        /// martingale | bs | ou
        #[arg(long, default_value = "martingale")]
        model: String,
        /// Fill-intensity function: inv-square.
        #[arg(long, default_value = "inv-square")]
        f: String,
        /// Correlation function: inv | zero.
        #[arg(long, default_value = "inv")]
        rho: String,
        #[arg(long = "T", default_value_t = 1.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0.0)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        reversion: f64,
        /// Long-term mean (OU) and default path price.
        #[arg(long, default_value_t = 100.0)]
        p0: f64,
        /// Optional CSV path `t,p,sigma`; defaults to 51 points at `p0`.
        #[arg(long)]
        path: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Covariation CLT test and the null-rejection procedure on a series.
    Covartest {
        #[arg(long)]
        series: String,
        #[arg(long, default_value_t = 100)]
        window: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long)]
        out: Option<String>,
        /// CSV of the cumulative covariation path with confidence bands.
        #[arg(long)]
        out_csv: Option<String>,
    },
    /// Assemble the cross-sectional rejection table from a directory of
    /// covartest reports (file stem = stock name).
    Report {
        #[arg(long)]
        inputs: String,
        #[arg(long)]
        out: String,
    },
    /// Generate a synthetic at-quotes tape.
    GenTape {
        #[arg(long)]
        out: String,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        /// Base mid price in currency (tick 1e-4).
        #[arg(long, default_value_t = 100.0)]
        base: f64,
        #[arg(long, default_value_t = 2)]
        spread_ticks: i64,
        #[arg(long, default_value_t = 1.0)]
        impact_rate: f64,
        #[arg(long, default_value_t = 1.0)]
        recovery_rate: f64,
        #[arg(long, default_value_t = 100)]
        max_size: u32,
        /// uniform | half-spread
        #[arg(long, default_value = "uniform")]
        mid_move: String,
    },
    /// Run the fast acceptance subset and print one line per criterion.
    Selfcheck,
}

/// Error carrying the exit code contract: 1 validation, 2 I/O.
pub enum CmdError {
    Invalid(String),
    Io(String),
}

impl CmdError {
    fn exit_code(&self) -> u8 {
        match self {
            CmdError::Invalid(_) => 1,
            CmdError::Io(_) => 2,
        }
    }

    fn emit(&self) {
        match self {
            CmdError::Invalid(msg) => eprintln!("E:invalid:{msg}"),
            CmdError::Io(msg) => eprintln!("E:io:{msg}"),
        }
    }
}

pub fn invalid(msg: impl std::fmt::Display) -> CmdError {
    CmdError::Invalid(msg.to_string())
}

pub fn io_err(msg: impl std::fmt::Display) -> CmdError {
    CmdError::Io(msg.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders --help/--version on stdout with success
            if e.use_stderr() {
                eprintln!("E:usage:{e}");
                return ExitCode::from(1);
            }
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("E:invalid:thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Ingest { tape, out } => commands::ingest(&tape, &out),
        Command::Validate { series, out } => commands::validate(&series, out.as_deref()),
        Command::Reconstruct { series, model, book_costs, out, out_csv } => {
            commands::reconstruct(&series, &model, book_costs.as_deref(), out.as_deref(), out_csv.as_deref())
        }
        Command::Toxicity { series, window, out } => {
            commands::toxicity(&series, window.as_deref(), out.as_deref())
        }
        Command::Simulate { config, check, out } => {
            commands::simulate(&config, &check, out.as_deref(), cli.seed)
        }
        Command::Hedge { payoff, lambda, sigma, sigma_mode, maturity, grid, spot, out, out_csv } => {
            commands::hedge(
                &payoff, lambda, sigma, &sigma_mode, maturity, &grid, spot,
                out.as_deref(), out_csv.as_deref(),
            )
        }
        Command::Mm { model, f, rho, horizon, mu, sigma, reversion, p0, path, out } => {
            commands::market_maker(
                &model, &f, &rho, horizon, mu, sigma, reversion, p0,
                path.as_deref(), out.as_deref(),
            )
        }
        Command::Covartest { series, window, level, out, out_csv } => {
            commands::covartest(&series, window, level, out.as_deref(), out_csv.as_deref())
        }
        Command::Report { inputs, out } => commands::report(&inputs, &out),
        Command::GenTape {
            out, n, base, spread_ticks, impact_rate, recovery_rate, max_size, mid_move,
        } => commands::gen_tape(
            &out, n, base, spread_ticks, impact_rate, recovery_rate, max_size, &mid_move,
            cli.seed.unwrap_or(0),
        ),
        Command::Selfcheck => selfcheck::run(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            e.emit();
            ExitCode::from(e.exit_code())
        }
    }
}

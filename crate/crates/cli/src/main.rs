//! `macrofc`: ingest, factor diagnostics, synthetic data, backtests and reports.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use macrofc::YearMonth;

use commands::{FactorsArgs, IngestArgs, ReportArgs, RunArgs, SynthArgs, SynthKind};

/// A problem with user-supplied input (exit code 2).
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

#[derive(Parser)]
#[command(name = "macrofc", version, about = "Macroeconomic forecasting backtests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    /// Level targets with AR(1) growth plus factor-driven predictors.
    Backtest,
    /// Static factor panel integrated into raw levels.
    Factor,
}

#[derive(Subcommand)]
enum Command {
    /// Transform and balance a raw panel.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        em_factors: usize,
        /// Validate the inputs without writing anything.
        #[arg(long)]
        dry_run: bool,
    },
    /// Factor count and marginal R² diagnostics of a balanced panel.
    Factors {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Largest factor count considered, capped at min(T, N) / 2.
        #[arg(long, default_value_t = 15)]
        kmax: usize,
        /// Report this many factors instead of the selected count.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 10)]
        top: usize,
        /// First month of the recursive factor count.
        #[arg(long)]
        recursive_start: Option<YearMonth>,
    },
    /// Write a synthetic raw panel.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "backtest")]
        kind: Kind,
        #[arg(long, default_value_t = 200)]
        t: usize,
        #[arg(long, default_value_t = 30)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        targets: usize,
        #[arg(long, default_value_t = 3)]
        r: usize,
        #[arg(long, default_value_t = 10.0)]
        snr: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "2000-01")]
        start: YearMonth,
    },
    /// Run a pseudo-out-of-sample backtest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Model names separated by ';' (names such as "AR,BIC" contain commas); repeatable.
        #[arg(long, value_delimiter = ';')]
        models: Option<Vec<String>>,
        #[arg(long)]
        retune_every: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
        /// Write the design seen by MODEL for TARGET at an origin: MODEL@TARGET@YYYY-MM.
        #[arg(long)]
        dump_design: Option<String>,
        #[arg(long)]
        dry_run: bool,
    },
    /// Relative-MSE tables from a records file.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        benchmark: Option<String>,
        /// First origin of the plot-ready forecast series.
        #[arg(long, default_value = "2020-01")]
        series_from: YearMonth,
    },
}

fn dispatch(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Ingest {
            manifest,
            data,
            out,
            em_factors,
            dry_run,
        } => commands::ingest(&IngestArgs {
            manifest,
            data,
            out,
            em_factors,
            dry_run,
        }),
        Command::Factors {
            panel,
            manifest,
            out,
            kmax,
            k,
            top,
            recursive_start,
        } => commands::factors(&FactorsArgs {
            panel,
            manifest,
            out,
            kmax,
            k,
            top,
            recursive_start,
        }),
        Command::Synth {
            out,
            kind,
            t,
            n,
            targets,
            r,
            snr,
            seed,
            start,
        } => commands::synth(&SynthArgs {
            out,
            t,
            n,
            seed,
            start,
            kind: match kind {
                Kind::Backtest => SynthKind::Backtest { targets },
                Kind::Factor => SynthKind::Factor { r, snr },
            },
        }),
        Command::Run {
            config,
            models,
            retune_every,
            threads,
            dump_design,
            dry_run,
        } => commands::run(&RunArgs {
            config,
            models,
            retune_every,
            threads,
            dump_design,
            dry_run,
        }),
        Command::Report {
            records,
            out,
            benchmark,
            series_from,
        } => commands::report(&ReportArgs {
            records,
            out,
            benchmark,
            series_from,
        }),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<InputError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<macrofc::Error>() {
            return if e.is_data_error() { 2 } else { 1 };
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MACROFC_LOG", "warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

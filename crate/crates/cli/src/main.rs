use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dppca_cli::config::parse_filter;
use dppca_cli::results::read_csv;
use dppca_cli::runner::{manifest_path, run_experiment, write_outputs};
use dppca_cli::summary::{parse_keys, summarize, write_summary};
use dppca_cli::{CliError, ExperimentConfig, CONFIG_SCHEMA};

/// Differentially private streaming PCA experiments.
#[derive(Debug, Parser)]
#[command(name = "dppca", version, arg_required_else_help = true)]
struct Cli {
    /// Print an annotated example config and exit.
    #[arg(long)]
    print_config_schema: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every algorithm, grid point and trial of a config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// CSV output; defaults to the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to the number of cores.
        #[arg(long)]
        threads: Option<usize>,
        /// Restrict the run, e.g. `algo=oja,dppca`.
        #[arg(long)]
        filter: Option<String>,
    },
    /// Median and quartiles of sin_error per group.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "algorithm,n")]
        by: String,
    },
}

fn run(
    config: PathBuf,
    out: Option<PathBuf>,
    threads: Option<usize>,
    filter: Option<String>,
) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::from_path(&config)?;
    if let Some(spec) = filter {
        cfg.restrict_to(&parse_filter(&spec)?)?;
    }
    let out = out
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| CliError::config("output", "give --out or set `output` in the config"))?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::config("threads", "must be at least 1"));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker threads: {e}")))?;
    let rows = pool.install(|| run_experiment(&cfg))?;
    write_outputs(&cfg, &rows, &out)?;
    log::info!(
        "wrote {} rows to {} and {}",
        rows.len(),
        out.display(),
        manifest_path(&out).display()
    );
    Ok(())
}

fn summarize_file(input: PathBuf, by: String) -> Result<(), CliError> {
    let keys = parse_keys(&by)?;
    let file = std::fs::File::open(&input)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", input.display())))?;
    let rows = read_csv(file)?;
    let groups = summarize(&rows, &keys)?;
    write_summary(&keys, &groups, std::io::stdout().lock())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if cli.print_config_schema {
        print!("{CONFIG_SCHEMA}");
        return ExitCode::SUCCESS;
    }
    let result = match cli.command {
        Some(Command::Run {
            config,
            out,
            threads,
            filter,
        }) => run(config, out, threads, filter),
        Some(Command::Summarize { input, by }) => summarize_file(input, by),
        None => Err(CliError::config("command", "expected `run` or `summarize`")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

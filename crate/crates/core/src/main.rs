//! Command-line entry point: full pipeline runs and single-stage verbs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use newstrend::config::{load_config, RunMode};
use newstrend::pipeline::{run_dir_for, run_pipeline, RunOptions};

#[derive(Parser)]
#[command(
    name = "newstrend",
    about = "Retrieves dated, source-filtered news, scores it with a two-level LLM analysis, \
             and fits Bayesian trend lines to the scores."
)]
struct Cli {
    /// Campaign config file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config's mode.
    #[arg(long, global = true, value_enum)]
    mode: Option<ModeArg>,

    /// Skip stages whose outputs already exist in the run directory.
    #[arg(long, global = true)]
    resume: bool,

    /// Override the sampler seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output root; runs live under `<out>/runs/<config-digest>/`.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Live,
    Fixtures,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run the full pipeline.
    Run,
    /// Build and execute the search requests.
    Search,
    /// Fetch grouped URLs and extract article text.
    Fetch,
    /// Run the per-article analysis.
    Analyze,
    /// Run the group-level analysis (periods, sources, trend).
    Aggregate,
    /// Compute score distributions and means.
    Stats,
    /// Fit the Bayesian trend models.
    Fit,
    /// Render plots, tables, and the summary document.
    Report,
}

impl Command {
    fn stage_filter(self) -> Option<Vec<String>> {
        let stage = match self {
            Command::Run => return None,
            Command::Search => "search",
            Command::Fetch => "fetch",
            Command::Analyze => "analyze",
            Command::Aggregate => "aggregate",
            Command::Stats => "stats",
            Command::Fit => "fit",
            Command::Report => "report",
        };
        Some(vec![stage.to_string()])
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    let Some(config_path) = cli.config.as_ref() else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(2);
    };
    let mut config = match load_config(config_path) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(mode) = cli.mode {
        config.mode = match mode {
            ModeArg::Live => RunMode::Live,
            ModeArg::Fixtures => RunMode::Fixtures,
        };
    }

    let opts = RunOptions {
        out_dir: cli.out.clone(),
        resume: cli.resume,
        seed: cli.seed,
        stages: cli.command.stage_filter(),
    };
    match run_pipeline(&config, &opts) {
        Ok(Some(bundle)) => {
            let report_dir = run_dir_for(&config, &cli.out).join("report");
            println!("report written to {}", report_dir.display());
            if !bundle.meta.exclusions.is_empty() {
                println!("{} article(s) excluded; see manifest", bundle.meta.exclusions.len());
            }
            ExitCode::SUCCESS
        }
        Ok(None) => {
            println!(
                "done; outputs in {}",
                run_dir_for(&config, &cli.out).display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

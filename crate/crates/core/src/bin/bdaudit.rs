use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bdaudit_core::ingest::write_cache;
use bdaudit_core::runner::{self, ExperimentConfig};
use bdaudit_core::{cohort_stats, Error};

#[derive(Parser, Debug)]
#[command(name = "bdaudit", version, about = "Bias-disparity audits for recommender algorithms")]
struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `seed` from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse the configured dataset and write a binary cache to --out.
    Ingest,
    /// Print cohort statistics as JSON.
    Stats,
    /// Run the full experiment.
    Run {
        /// Also write per-fold top-N lists under recommendations/.
        #[arg(long)]
        export_recs: bool,
    },
    /// Re-render charts from the CSVs in --out.
    Report,
}

enum Failure {
    Usage(String),
    Pipeline(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Pipeline(e)
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Usage("--config is required for this command".into()))?;
    let mut cfg = ExperimentConfig::load(path).map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> Result<PathBuf, Failure> {
    cli.out
        .clone()
        .ok_or_else(|| Failure::Usage("--out is required for this command".into()))
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Ingest => {
            let out = out_dir(cli)?;
            let cfg = load_config(cli)?;
            let dataset = runner::load_dataset(&cfg.dataset)?;
            write_cache(&dataset, &out)?;
            println!(
                "cached {} users, {} items, {} interactions to {}",
                dataset.n_users(),
                dataset.n_items(),
                dataset.n_interactions(),
                out.display()
            );
        }
        Command::Stats => {
            let cfg = load_config(cli)?;
            let dataset = runner::load_dataset(&cfg.dataset).map_err(|e| e.in_stage("ingest"))?;
            let cohort = runner::build_cohort(&cfg, &dataset).map_err(|e| e.in_stage("cohort"))?;
            let stats = serde_json::to_string_pretty(&cohort_stats(&cohort)).map_err(Error::from)?;
            println!("{stats}");
        }
        Command::Run { export_recs } => {
            let cfg = load_config(cli)?;
            let (report, artifacts) = runner::run_experiment_with_artifacts(&cfg)?;
            let mut written = runner::emit_report(&report, &cfg.output_dir)?;
            if *export_recs {
                written.extend(runner::write_recommendations(&artifacts, &cfg.output_dir)?);
            }
            for p in written {
                println!("{}", p.display());
            }
        }
        Command::Report => {
            let out = out_dir(cli)?;
            for p in runner::rerender_charts(&out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

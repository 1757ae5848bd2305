use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use mlda_harness::report::{config_hash, write_report};
use mlda_harness::{run, run_all, ExperimentConfig, ExperimentId, ExperimentReport};

/// Runs a verification experiment and writes `<experiment>.csv` and
/// `<experiment>.summary.json`.
#[derive(Debug, Parser)]
#[command(name = "mlda", version)]
struct Cli {
    experiment: ExperimentId,
    /// JSON config; defaults reproduce the published protocol.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the main trial count of every experiment.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, env = "MLDA_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: &Cli) -> mlda_harness::Result<bool> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(cli.experiment),
    };
    config.experiment = cli.experiment;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(t) = cli.trials {
        config.set_trials(t);
    }
    if cli.out.is_some() {
        config.out = cli.out.clone();
    }
    config.validate()?;
    let threads = cli.threads.unwrap_or(0);
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    let hash = config_hash(&config);

    let reports: Vec<ExperimentReport> = if config.experiment == ExperimentId::All {
        run_all(&config, threads)?
    } else {
        vec![run(&config, threads)?]
    };
    let mut ok = true;
    for report in &reports {
        let (csv, _) = write_report(&out, report, &hash)?;
        for (criterion, pass) in &report.passes {
            println!("{:<15} criterion {criterion:>2}: {}", report.id.name(), if *pass { "PASS" } else { "FAIL" });
        }
        for f in &report.failures {
            eprintln!("  {f}");
        }
        eprintln!("wrote {}", csv.display());
        ok &= report.all_passed();
    }
    Ok(ok)
}

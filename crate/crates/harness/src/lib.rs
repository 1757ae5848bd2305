//! Monte Carlo verification suite for orthogonal multilabel discriminant
//! analysis.
//!
//! Each experiment reads its section of an [`ExperimentConfig`], runs its
//! trials on a dedicated thread pool and returns an [`ExperimentReport`]
//! with one pass flag per acceptance criterion it covers. Results depend
//! only on the config and its seed, never on the thread count.

pub mod checks;
pub mod config;
pub mod error;
mod experiments;
pub mod report;
pub mod stats;

use std::time::Instant;

pub use config::{ExperimentConfig, ExperimentId};
pub use error::{HarnessError, Result};
pub use report::ExperimentReport;

/// Runs one experiment. `All` is rejected here; use [`run_all`].
pub fn run(config: &ExperimentConfig, threads: usize) -> Result<ExperimentReport> {
    config.validate()?;
    if config.experiment == ExperimentId::All {
        return error::config_err("run one experiment at a time, or use run_all");
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let start = Instant::now();
    let mut report = pool.install(|| experiments::dispatch(config))?;
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Runs the whole suite in order with the shared settings of `config`.
pub fn run_all(config: &ExperimentConfig, threads: usize) -> Result<Vec<ExperimentReport>> {
    config.validate()?;
    ExperimentId::SUITE
        .iter()
        .map(|&id| {
            let mut c = config.clone();
            c.experiment = id;
            run(&c, threads)
        })
        .collect()
}

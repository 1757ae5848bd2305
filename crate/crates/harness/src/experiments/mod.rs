//! The eight experiment protocols.

mod concentration;
mod convergence;
mod distance;
mod divergence;
mod factors;
mod interaction;
mod rank;
mod regularization;

use mlda_core::population::ModelParams;
use mlda_core::scatter::{Dataset, LabelMatrix};
use mlda_core::synth::{gen_data, Seed};
use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentId};
use crate::error::Result;
use crate::report::ExperimentReport;

pub(crate) fn dispatch(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let ctx = Ctx::new(config);
    match config.experiment {
        ExperimentId::Rank => rank::run(&config.rank, &ctx),
        ExperimentId::Divergence => divergence::run(&config.divergence, &ctx),
        ExperimentId::Distance => distance::run(&config.distance, &ctx),
        ExperimentId::Convergence => convergence::run(&config.convergence, &ctx),
        ExperimentId::Factors => factors::run(&config.factors, &ctx),
        ExperimentId::Concentration => concentration::run(&config.concentration, &ctx),
        ExperimentId::Interaction => interaction::run(&config.interaction, &ctx),
        ExperimentId::Regularization => regularization::run(&config.regularization, &ctx),
        ExperimentId::All => crate::error::config_err("the suite is not a single experiment"),
    }
}

/// Seed streams of one experiment.
pub(crate) struct Ctx {
    pub id: ExperimentId,
    pub seed: Seed,
}

impl Ctx {
    fn new(config: &ExperimentConfig) -> Self {
        Self {
            id: config.experiment,
            seed: Seed::new(config.seed),
        }
    }

    /// Generator for `(block, trial, purpose)`; blocks separate settings.
    pub fn rng(&self, block: u64, trial: u64, purpose: u64) -> ChaCha8Rng {
        self.seed.stream(self.id.stream(), (block << 32) | trial, purpose)
    }

    pub fn report(&self, table: crate::report::Table) -> ExperimentReport {
        ExperimentReport::new(self.id, table, self.seed.base)
    }
}

/// Runs `f` on `0..count` in parallel and returns the results in index order.
pub(crate) fn par_trials<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    (0..count).into_par_iter().map(f).collect()
}

/// Dataset drawn from the model with fresh noise.
pub(crate) fn sample(labels: &LabelMatrix, params: &ModelParams, alpha: f64, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    Ok(gen_data(labels, params, alpha, rng)?)
}

pub(crate) fn label_vector(y: &[u8]) -> DVector<f64> {
    DVector::from_iterator(y.len(), y.iter().map(|&b| f64::from(b)))
}

/// Two distinct row indices.
pub(crate) fn random_pair(n: usize, rng: &mut ChaCha8Rng) -> (usize, usize) {
    use rand::Rng;
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    crate::stats::nearest_rank(values, 50.0)
}

/// `‖Wᵀ(v + e)‖²` for each column `e` of `noise`.
pub(crate) fn projected_sq(wt: &DMatrix<f64>, v: &DVector<f64>, noise: &DMatrix<f64>) -> Vec<f64> {
    let base = wt * v;
    let proj = wt * noise;
    proj.column_iter().map(|c| (&base + c).norm_squared()).collect()
}

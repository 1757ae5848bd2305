//! JSON experiment configuration.
//!
//! Every section has defaults matching the published protocol, so a config
//! file only needs `{"experiment": "<id>"}`. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use mlda_core::bounds::SigmaMin;
use mlda_core::population::{ModelParams, NoiseKind};
use mlda_core::synth::{gaussian_matrix, orthogonal_effects, LabelScheme, SchemeKind};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentId {
    Rank,
    Divergence,
    Distance,
    Convergence,
    Factors,
    Concentration,
    Interaction,
    Regularization,
    All,
}

impl ExperimentId {
    pub const SUITE: [ExperimentId; 8] = [
        ExperimentId::Rank,
        ExperimentId::Divergence,
        ExperimentId::Distance,
        ExperimentId::Convergence,
        ExperimentId::Factors,
        ExperimentId::Concentration,
        ExperimentId::Interaction,
        ExperimentId::Regularization,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentId::Rank => "rank",
            ExperimentId::Divergence => "divergence",
            ExperimentId::Distance => "distance",
            ExperimentId::Convergence => "convergence",
            ExperimentId::Factors => "factors",
            ExperimentId::Concentration => "concentration",
            ExperimentId::Interaction => "interaction",
            ExperimentId::Regularization => "regularization",
            ExperimentId::All => "all",
        }
    }

    /// Stream id for seed derivation.
    pub fn stream(&self) -> u64 {
        match self {
            ExperimentId::Rank => 1,
            ExperimentId::Divergence => 2,
            ExperimentId::Distance => 3,
            ExperimentId::Convergence => 4,
            ExperimentId::Factors => 5,
            ExperimentId::Concentration => 6,
            ExperimentId::Interaction => 7,
            ExperimentId::Regularization => 8,
            ExperimentId::All => 0,
        }
    }
}

/// How the label-effect matrix `A` is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EffectsSpec {
    /// Entries i.i.d. `N(0, sd²)`.
    Gaussian { sd: f64 },
    /// `U diag(s) Vᵀ` with Haar-random `U`, `V`; needs `L = len(s)`.
    Orthogonal { singular_values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub effects: EffectsSpec,
    /// Isotropic noise scale, `Σ_w = σ_w² I`.
    pub sigma_w: f64,
    #[serde(default)]
    pub noise: NoiseKind,
}

impl ModelSpec {
    pub fn gaussian(sd: f64, sigma_w: f64) -> Self {
        Self {
            effects: EffectsSpec::Gaussian { sd },
            sigma_w,
            noise: NoiseKind::Gaussian,
        }
    }

    fn validate(&self, d: usize, l: usize) -> Result<()> {
        if !(self.sigma_w > 0.0) || !self.sigma_w.is_finite() {
            return config_err(format!("sigma_w must be positive, got {}", self.sigma_w));
        }
        match &self.effects {
            EffectsSpec::Gaussian { sd } if !(*sd > 0.0) => config_err("effect sd must be positive"),
            EffectsSpec::Orthogonal { singular_values } if singular_values.len() != l => config_err(format!(
                "{} singular values for {l} labels",
                singular_values.len()
            )),
            EffectsSpec::Orthogonal { .. } if l > d => config_err(format!("orthogonal effects need L ≤ d, got L={l}, d={d}")),
            _ => Ok(()),
        }
    }

    pub fn build<R: Rng + ?Sized>(&self, d: usize, l: usize, rng: &mut R) -> Result<ModelParams> {
        let a = match &self.effects {
            EffectsSpec::Gaussian { sd } => gaussian_matrix(d, l, *sd, rng),
            EffectsSpec::Orthogonal { singular_values } => orthogonal_effects(d, singular_values, rng)?,
        };
        let mut params = ModelParams::isotropic(a, self.sigma_w)?;
        params.noise = self.noise;
        Ok(params)
    }
}

fn default_model() -> ModelSpec {
    ModelSpec::gaussian(2.0, 1.0)
}

fn variable_mix() -> SchemeKind {
    SchemeKind::Variable {
        mix: vec![(1, 0.4), (2, 0.4), (3, 0.2)],
    }
}

fn scheme(kind: &SchemeKind, l: usize) -> Result<LabelScheme> {
    LabelScheme::new(kind.clone(), l).map_err(|e| crate::error::HarnessError::Config(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankSetting {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub l: usize,
    pub scheme: SchemeKind,
    /// Published `rank(S_b)`; `None` skips the comparison.
    pub expected_rank: Option<usize>,
    pub expected_excess: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankConfig {
    pub settings: Vec<RankSetting>,
    pub model: ModelSpec,
}

impl Default for RankConfig {
    fn default() -> Self {
        let s = |name: &str, n, d, l, scheme: SchemeKind, rank, excess| RankSetting {
            name: name.into(),
            n,
            d,
            l,
            scheme,
            expected_rank: Some(rank),
            expected_excess: Some(excess),
        };
        Self {
            settings: vec![
                s("Variable card", 100, 20, 6, variable_mix(), 6, true),
                s("Single-label (k=1)", 100, 20, 6, SchemeKind::Single, 5, false),
                s("Uniform k=3", 100, 20, 6, SchemeKind::Uniform { k: 3 }, 5, false),
                s("Variable card", 200, 50, 14, variable_mix(), 14, true),
                s("Single-label", 200, 50, 14, SchemeKind::Single, 13, false),
                s("High-dim (d > n)", 50, 100, 10, variable_mix(), 10, true),
            ],
            model: default_model(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedScheme {
    pub name: String,
    pub scheme: SchemeKind,
}

fn named(name: &str, scheme: SchemeKind) -> NamedScheme {
    NamedScheme {
        name: name.into(),
        scheme,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DivergenceConfig {
    pub n: usize,
    pub d: usize,
    pub l: usize,
    pub r: usize,
    pub instances: usize,
    pub settings: Vec<NamedScheme>,
    pub model: ModelSpec,
    /// Minimum median TD–TR angle, in degrees, for the single-label setting.
    pub min_single_label_angle_deg: f64,
}

impl Default for DivergenceConfig {
    fn default() -> Self {
        Self {
            n: 200,
            d: 20,
            l: 6,
            r: 2,
            instances: 50,
            settings: vec![
                named("Single-label (k=1)", SchemeKind::Single),
                named("Uniform k=2", SchemeKind::Uniform { k: 2 }),
                named("Uniform k=3", SchemeKind::Uniform { k: 3 }),
                named("Variable (mean≈2)", SchemeKind::Variable { mix: vec![(1, 0.3), (2, 0.4), (3, 0.3)] }),
                named("Variable (mean≈3)", SchemeKind::Variable { mix: vec![(2, 0.3), (3, 0.4), (4, 0.3)] }),
            ],
            model: default_model(),
            min_single_label_angle_deg: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceConfig {
    pub n: usize,
    pub d: usize,
    pub l: usize,
    /// Projection rank is `min(r_max, L)`.
    pub r_max: usize,
    pub pairs: usize,
    pub draws: usize,
    pub se_mult: f64,
    pub min_pass_rate: f64,
    pub sigma_min: SigmaMin,
    pub settings: Vec<NamedScheme>,
    pub model: ModelSpec,
    /// Random instances for the residual-bound check.
    pub residual_instances: usize,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        Self {
            n: 200,
            d: 20,
            l: 6,
            r_max: 6,
            pairs: 200,
            draws: 50,
            se_mult: 3.0,
            min_pass_rate: 0.95,
            sigma_min: SigmaMin::Full,
            settings: vec![
                named("Variable card", variable_mix()),
                named("Uniform k=2", SchemeKind::Uniform { k: 2 }),
                named("Uniform k=3", SchemeKind::Uniform { k: 3 }),
            ],
            model: default_model(),
            residual_instances: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub n_grid: Vec<usize>,
    pub d: usize,
    pub l: usize,
    pub model: ModelSpec,
    pub scheme: SchemeKind,
    pub trials: usize,
    /// Adaptive rank: the largest `r ≤ L` whose per-sample gap `gap_r/n` at
    /// the largest `n` exceeds this threshold.
    pub gap_threshold: f64,
    /// Fixed rank, bypassing the adaptive rule.
    pub r: Option<usize>,
    pub max_final_median: f64,
    pub max_inversions: usize,
    pub slope_range: (f64, f64),
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            n_grid: vec![50, 100, 200, 500, 1000, 2000, 5000, 10000, 20000],
            d: 15,
            l: 5,
            model: ModelSpec {
                effects: EffectsSpec::Orthogonal {
                    singular_values: vec![8.0, 6.0, 4.0, 1.5, 1.0],
                },
                sigma_w: 0.5,
                noise: NoiseKind::Gaussian,
            },
            scheme: SchemeKind::Variable { mix: vec![(1, 0.7), (2, 0.3)] },
            trials: 100,
            gap_threshold: 2.0,
            r: None,
            max_final_median: 0.05,
            max_inversions: 1,
            slope_range: (-0.6, -0.15),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactorsConfig {
    pub n: usize,
    pub d: usize,
    pub l: usize,
    pub r: usize,
    pub trials: usize,
    pub model: ModelSpec,
    pub kmax_settings: Vec<NamedScheme>,
    /// Allowed max/min spread of the gap-normalized ratio.
    pub ratio_spread: f64,
    /// Row scalings of the first `r` rows of `A` in the conditioning probe.
    pub kappa_factors: Vec<f64>,
    pub kappa_scheme: SchemeKind,
    /// Data rescaling factor for the generalized-gap probe.
    pub scale: f64,
    pub delta_tol: f64,
    pub gap_scale_tol: f64,
    pub gamma_multilabel: SchemeKind,
}

impl Default for FactorsConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            d: 12,
            l: 5,
            r: 1,
            trials: 80,
            model: ModelSpec::gaussian(2.0, 0.5),
            kmax_settings: vec![
                named("k_max=1", SchemeKind::Single),
                named("k_max=2", SchemeKind::Variable { mix: vec![(1, 0.8), (2, 0.2)] }),
                named("k_max=3", SchemeKind::Variable { mix: vec![(1, 0.9), (3, 0.1)] }),
            ],
            ratio_spread: 2.0,
            kappa_factors: vec![1.0, 5.0],
            kappa_scheme: SchemeKind::Variable { mix: vec![(1, 0.8), (2, 0.2)] },
            scale: 3.0,
            delta_tol: 1e-10,
            gap_scale_tol: 1e-8,
            gamma_multilabel: SchemeKind::Variable { mix: vec![(2, 0.3), (3, 0.4), (4, 0.3)] },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcentrationConfig {
    pub n: usize,
    pub d: usize,
    pub l: usize,
    pub r: usize,
    pub pairs: usize,
    pub draws: usize,
    pub deltas: Vec<f64>,
    pub c_scale: f64,
    pub scheme: SchemeKind,
    pub model: ModelSpec,
    pub linear_var_tol: f64,
    pub mean_se_mult: f64,
    pub max_tail_ratio: f64,
}

impl Default for ConcentrationConfig {
    fn default() -> Self {
        Self {
            n: 200,
            d: 20,
            l: 6,
            r: 3,
            pairs: 50,
            draws: 10_000,
            deltas: vec![0.01, 0.05, 0.1, 0.2],
            c_scale: 1.0,
            scheme: variable_mix(),
            model: default_model(),
            linear_var_tol: 0.01,
            mean_se_mult: 4.0,
            max_tail_ratio: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InteractionConfig {
    pub n: usize,
    pub d: usize,
    pub l: usize,
    pub r: usize,
    pub pairs: usize,
    pub draws: usize,
    pub alphas: Vec<f64>,
    pub se_mult: f64,
    /// Entries of the unscaled interaction matrix are `N(0, sd²)`.
    pub interaction_sd: f64,
    pub scheme: SchemeKind,
    pub model: ModelSpec,
    pub min_corrected_rate: f64,
}

impl Default for InteractionConfig {
    fn default() -> Self {
        Self {
            n: 200,
            d: 20,
            l: 6,
            r: 6,
            pairs: 200,
            draws: 50,
            alphas: vec![0.0, 0.1, 0.5, 1.0, 2.0],
            se_mult: 3.0,
            interaction_sd: 1.0,
            scheme: variable_mix(),
            model: default_model(),
            min_corrected_rate: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularizationConfig {
    pub n: usize,
    pub d: usize,
    pub l: usize,
    pub r: usize,
    pub trials: usize,
    pub gammas: Vec<f64>,
    pub scheme: SchemeKind,
    pub model: ModelSpec,
    pub expected_rank: usize,
    pub kappa_ratio: (f64, f64),
    pub gap_tol: f64,
}

impl Default for RegularizationConfig {
    fn default() -> Self {
        Self {
            n: 50,
            d: 200,
            l: 10,
            r: 10,
            trials: 50,
            gammas: vec![0.0, 0.01, 0.1, 1.0, 10.0],
            scheme: variable_mix(),
            model: default_model(),
            expected_rank: 10,
            kappa_ratio: (8.0, 12.0),
            gap_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub rank: RankConfig,
    #[serde(default)]
    pub divergence: DivergenceConfig,
    #[serde(default)]
    pub distance: DistanceConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub factors: FactorsConfig,
    #[serde(default)]
    pub concentration: ConcentrationConfig,
    #[serde(default)]
    pub interaction: InteractionConfig,
    #[serde(default)]
    pub regularization: RegularizationConfig,
}

fn default_seed() -> u64 {
    20_240_917
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        config_err(format!("{name} must be positive, got {v}"))
    }
}

fn at_least_one(name: &str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        config_err(format!("{name} must be at least 1"))
    }
}

fn dims(what: &str, n: usize, d: usize, l: usize, r: usize) -> Result<()> {
    if d == 0 || l < 2 || n < l {
        return config_err(format!("{what}: need d ≥ 1, L ≥ 2 and n ≥ L (n={n}, d={d}, L={l})"));
    }
    if r == 0 || r > d {
        return config_err(format!("{what}: rank r={r} outside 1..={d}"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentId) -> Self {
        Self {
            experiment,
            seed: default_seed(),
            out: None,
            rank: RankConfig::default(),
            divergence: DivergenceConfig::default(),
            distance: DistanceConfig::default(),
            convergence: ConvergenceConfig::default(),
            factors: FactorsConfig::default(),
            concentration: ConcentrationConfig::default(),
            interaction: InteractionConfig::default(),
            regularization: RegularizationConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| crate::error::HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Overrides the main trial count of every experiment.
    pub fn set_trials(&mut self, t: usize) {
        self.divergence.instances = t;
        self.convergence.trials = t;
        self.factors.trials = t;
        self.regularization.trials = t;
        self.distance.draws = t;
        self.interaction.draws = t;
        self.concentration.draws = t;
    }

    /// Checks the sections the selected experiment will use.
    pub fn validate(&self) -> Result<()> {
        let all = self.experiment == ExperimentId::All;
        let uses = |id: ExperimentId| all || self.experiment == id;
        if uses(ExperimentId::Rank) {
            let c = &self.rank;
            if c.settings.is_empty() {
                return config_err("rank: no settings");
            }
            for s in &c.settings {
                dims(&s.name, s.n, s.d, s.l, 1)?;
                scheme(&s.scheme, s.l)?;
                c.model.validate(s.d, s.l)?;
            }
        }
        if uses(ExperimentId::Divergence) {
            let c = &self.divergence;
            dims("divergence", c.n, c.d, c.l, c.r)?;
            at_least_one("divergence.instances", c.instances)?;
            if c.settings.is_empty() {
                return config_err("divergence: no settings");
            }
            for s in &c.settings {
                scheme(&s.scheme, c.l)?;
            }
            c.model.validate(c.d, c.l)?;
            if !(c.min_single_label_angle_deg >= 0.0) {
                return config_err("divergence.min_single_label_angle_deg must be non-negative");
            }
        }
        if uses(ExperimentId::Distance) {
            let c = &self.distance;
            dims("distance", c.n, c.d, c.l, c.r_max.min(c.l))?;
            at_least_one("distance.pairs", c.pairs)?;
            if c.draws < 2 {
                return config_err("distance.draws must be at least 2 for a standard error");
            }
            at_least_one("distance.residual_instances", c.residual_instances)?;
            positive("distance.se_mult", c.se_mult)?;
            positive("distance.min_pass_rate", c.min_pass_rate)?;
            if c.settings.is_empty() {
                return config_err("distance: no settings");
            }
            for s in &c.settings {
                scheme(&s.scheme, c.l)?;
            }
            c.model.validate(c.d, c.l)?;
        }
        if uses(ExperimentId::Convergence) {
            let c = &self.convergence;
            if c.n_grid.len() < 3 {
                return config_err("convergence.n_grid needs at least three sizes");
            }
            if c.n_grid.windows(2).any(|w| w[1] <= w[0]) {
                return config_err("convergence.n_grid must be strictly increasing");
            }
            dims("convergence", c.n_grid[0], c.d, c.l, c.r.unwrap_or(1))?;
            at_least_one("convergence.trials", c.trials)?;
            positive("convergence.gap_threshold", c.gap_threshold)?;
            positive("convergence.max_final_median", c.max_final_median)?;
            if !(c.slope_range.0 < c.slope_range.1) {
                return config_err("convergence.slope_range must be increasing");
            }
            scheme(&c.scheme, c.l)?;
            c.model.validate(c.d, c.l)?;
        }
        if uses(ExperimentId::Factors) {
            let c = &self.factors;
            dims("factors", c.n, c.d, c.l, c.r)?;
            at_least_one("factors.trials", c.trials)?;
            if c.kmax_settings.is_empty() || c.kappa_factors.is_empty() {
                return config_err("factors: empty sweep");
            }
            for s in &c.kmax_settings {
                scheme(&s.scheme, c.l)?;
            }
            scheme(&c.kappa_scheme, c.l)?;
            scheme(&c.gamma_multilabel, c.l)?;
            for &f in &c.kappa_factors {
                positive("factors.kappa_factors", f)?;
            }
            positive("factors.ratio_spread", c.ratio_spread)?;
            positive("factors.scale", c.scale)?;
            positive("factors.delta_tol", c.delta_tol)?;
            positive("factors.gap_scale_tol", c.gap_scale_tol)?;
            if c.r >= c.d {
                return config_err("factors.r must be below d for a gap to exist");
            }
            c.model.validate(c.d, c.l)?;
        }
        if uses(ExperimentId::Concentration) {
            let c = &self.concentration;
            dims("concentration", c.n, c.d, c.l, c.r)?;
            at_least_one("concentration.pairs", c.pairs)?;
            if c.draws < 100 {
                return config_err("concentration.draws must be at least 100 for percentile diagnostics");
            }
            if c.deltas.is_empty() || c.deltas.iter().any(|&d| !(d > 0.0 && d < 1.0)) {
                return config_err("concentration.deltas must be non-empty and inside (0, 1)");
            }
            positive("concentration.c_scale", c.c_scale)?;
            positive("concentration.linear_var_tol", c.linear_var_tol)?;
            positive("concentration.mean_se_mult", c.mean_se_mult)?;
            positive("concentration.max_tail_ratio", c.max_tail_ratio)?;
            scheme(&c.scheme, c.l)?;
            c.model.validate(c.d, c.l)?;
            if c.model.noise != NoiseKind::Gaussian {
                return config_err("concentration needs Gaussian noise");
            }
        }
        if uses(ExperimentId::Interaction) {
            let c = &self.interaction;
            dims("interaction", c.n, c.d, c.l, c.r)?;
            at_least_one("interaction.pairs", c.pairs)?;
            if c.draws < 2 {
                return config_err("interaction.draws must be at least 2 for a standard error");
            }
            if c.alphas.is_empty() || c.alphas.iter().any(|&a| !(a >= 0.0)) {
                return config_err("interaction.alphas must be non-empty and non-negative");
            }
            positive("interaction.se_mult", c.se_mult)?;
            positive("interaction.interaction_sd", c.interaction_sd)?;
            positive("interaction.min_corrected_rate", c.min_corrected_rate)?;
            scheme(&c.scheme, c.l)?;
            c.model.validate(c.d, c.l)?;
        }
        if uses(ExperimentId::Regularization) {
            let c = &self.regularization;
            dims("regularization", c.n, c.d, c.l, c.r)?;
            if c.r >= c.d {
                return config_err("regularization.r must be below d for a gap to exist");
            }
            at_least_one("regularization.trials", c.trials)?;
            if c.gammas.len() < 2 || c.gammas.iter().any(|&g| !(g >= 0.0)) || c.gammas.windows(2).any(|w| w[1] <= w[0]) {
                return config_err("regularization.gammas must be increasing, non-negative, with at least two values");
            }
            positive("regularization.gap_tol", c.gap_tol)?;
            if !(c.kappa_ratio.0 > 0.0 && c.kappa_ratio.0 <= c.kappa_ratio.1) {
                return config_err("regularization.kappa_ratio must be an increasing positive range");
            }
            scheme(&c.scheme, c.l)?;
            c.model.validate(c.d, c.l)?;
        }
        Ok(())
    }
}

pub(crate) fn label_scheme(kind: &SchemeKind, l: usize) -> Result<LabelScheme> {
    scheme(kind, l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"experiment": "convergence"}"#).unwrap();
        assert_eq!(cfg.convergence.n_grid.len(), 9);
        assert_eq!(cfg.seed, default_seed());
        assert_eq!(cfg.rank.settings.len(), 6);
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = ExperimentConfig::new(ExperimentId::All);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_infeasible_configs() {
        let bad = [
            r#"{"experiment": "divergence", "divergence": {"r": 40}}"#,
            r#"{"experiment": "convergence", "convergence": {"n_grid": []}}"#,
            r#"{"experiment": "convergence", "convergence": {"trials": 0}}"#,
            r#"{"experiment": "concentration", "concentration": {"c_scale": 0}}"#,
            r#"{"experiment": "distance", "distance": {"se_mult": -1}}"#,
            r#"{"experiment": "rank", "rank": {"settings": []}}"#,
            r#"{"experiment": "regularization", "regularization": {"scheme": {"kind": "uniform", "k": 11}}}"#,
            r#"{"experiment": "rank", "bogus": 1}"#,
        ];
        for text in bad {
            assert!(matches!(
                ExperimentConfig::from_json(text),
                Err(crate::error::HarnessError::Config(_))
            ), "{text}");
        }
    }
}

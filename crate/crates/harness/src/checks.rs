//! Randomized algebraic checks that need no Monte Carlo noise model.

use mlda_core::discriminant::{eval_objectives, opt_stml, theta_forms, ObjectiveValues};
use mlda_core::scatter::{build_scatter, residual_bound, Dataset};
use mlda_core::spectral::{inv_sqrt_pd, orthonormalize};
use mlda_core::synth::{gaussian_matrix, gen_labels, purpose, LabelScheme, Seed, SchemeKind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;

/// Stream ids, kept apart from the experiment streams.
const IDENTITY_STREAM: u64 = 101;
const OBJECTIVE_STREAM: u64 = 102;
const RESIDUAL_STREAM: u64 = 103;

fn random_scheme(l: usize, rng: &mut ChaCha8Rng) -> Result<LabelScheme> {
    let kind = match rng.random_range(0..3) {
        0 => SchemeKind::Single,
        1 => SchemeKind::Uniform {
            k: rng.random_range(1..l.min(4)),
        },
        _ => {
            let k2 = rng.random_range(2..=l.min(4));
            SchemeKind::Variable {
                mix: vec![(1, 0.5), (k2, 0.5)],
            }
        }
    };
    Ok(LabelScheme::new(kind, l)?)
}

/// Gaussian features around label-dependent means, so that no structure
/// beyond general position is assumed.
fn random_dataset(n: usize, d: usize, scheme: &LabelScheme, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let labels = gen_labels(scheme, n, rng)?;
    let a = gaussian_matrix(d, scheme.labels, 2.0, rng);
    let x = labels.to_matrix() * a.transpose() + gaussian_matrix(n, d, 1.0, rng);
    Ok(Dataset::new(x, labels)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub datasets: usize,
    pub max_partition: f64,
    pub max_factorization: f64,
    /// Most negative eigenvalue of `R` relative to `‖R‖₂`.
    pub min_residual_eig: f64,
    pub passed: bool,
}

/// Partition, factorization and residual positivity over random datasets.
pub fn scatter_identities(seed: u64, datasets: usize) -> Result<IdentityCheck> {
    let seed = Seed::new(seed);
    let rows: Vec<(f64, f64, f64)> = (0..datasets)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed.stream(IDENTITY_STREAM, t as u64, purpose::FEATURES);
            let l = rng.random_range(2..=15);
            let n = rng.random_range(l.max(20)..=300);
            let d = rng.random_range(1..=50);
            let scheme = random_scheme(l, &mut rng)?;
            let ds = random_dataset(n, d, &scheme, &mut rng)?;
            let ss = build_scatter(&ds)?;
            let st = ss.st_ml.matrix();
            let partition = (st - ss.sb.matrix() - ss.sw.matrix()).norm() / st.norm();
            let factor = (ss.sb.matrix() - &ss.m * ss.m.transpose()).norm() / ss.sb.matrix().norm();
            let eig = ss.r.eig();
            let scale = eig.lambda_max().abs();
            let neg = if scale > 0.0 { eig.lambda_min() / scale } else { 0.0 };
            Ok((partition, factor, neg))
        })
        .collect::<Result<_>>()?;
    let max_partition = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let max_factorization = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let min_residual_eig = rows.iter().map(|r| r.2).fold(0.0, f64::min);
    Ok(IdentityCheck {
        datasets,
        max_partition,
        max_factorization,
        min_residual_eig,
        passed: max_partition <= 1e-10 && max_factorization <= 1e-10 && min_residual_eig >= -1e-8,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ObjectiveCheck {
    pub instances: usize,
    pub probes: usize,
    /// Largest relative mismatch between an objective at the optimizer and
    /// its closed form.
    pub max_closed_form_error: f64,
    /// Probes beating the optimizer on some objective.
    pub violations: usize,
    pub passed: bool,
}

fn values(o: &ObjectiveValues) -> [f64; 4] {
    [
        o.j_tr,
        o.j_rt.unwrap_or(f64::INFINITY),
        o.j_dr.value().unwrap_or(f64::INFINITY),
        o.j_td,
    ]
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}

/// The optimizer under total-scatter orthogonality against random feasible
/// projections, on all four objectives.
pub fn objective_equivalence(seed: u64, instances: usize, probes: usize) -> Result<ObjectiveCheck> {
    let seed = Seed::new(seed);
    let rows: Vec<(f64, usize)> = (0..instances)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed.stream(OBJECTIVE_STREAM, t as u64, purpose::FEATURES);
            let l = rng.random_range(2..=8);
            let d = rng.random_range(2..=20);
            let n = rng.random_range((d + l + 10).max(50)..=300);
            let r = rng.random_range(1..=(l - 1).min(d - 1).max(1));
            let scheme = random_scheme(l, &mut rng)?;
            let ds = random_dataset(n, d, &scheme, &mut rng)?;
            let ss = build_scatter(&ds)?;
            let sol = opt_stml(&ss.sb, &ss.st_ml, r, 0.0)?;
            let at_opt = values(&eval_objectives(&sol.w, &ss.sb, &ss.sw)?);
            let closed = values(&theta_forms(sol.top_theta()));
            let err = at_opt.iter().zip(&closed).map(|(a, b)| rel(*a, *b)).fold(0.0, f64::max);

            let whiten = inv_sqrt_pd(&ss.st_ml, 1e-12)?;
            let mut prng = seed.stream(OBJECTIVE_STREAM, t as u64, purpose::PROBES);
            let mut violations = 0;
            for _ in 0..probes {
                let q = orthonormalize(&gaussian_matrix(d, r, 1.0, &mut prng))?;
                let w = &whiten * q.columns();
                let probe = values(&eval_objectives(&w, &ss.sb, &ss.sw)?);
                if probe.iter().zip(&at_opt).any(|(p, o)| *p > o + 1e-10 * o.abs().max(1.0)) {
                    violations += 1;
                }
            }
            Ok((err, violations))
        })
        .collect::<Result<_>>()?;
    let max_closed_form_error = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let violations = rows.iter().map(|r| r.1).sum();
    Ok(ObjectiveCheck {
        instances,
        probes,
        max_closed_form_error,
        violations,
        passed: max_closed_form_error <= 1e-8 && violations == 0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualCheck {
    pub instances: usize,
    pub uniform_instances: usize,
    /// Instances where `‖R‖₂` exceeds the bound.
    pub violations: usize,
    /// Largest relative gap between the two sides on uniform instances.
    pub max_uniform_gap: f64,
    pub passed: bool,
}

/// `‖R‖₂ ≤ max_i(k_i − 1)·λ_max(S_t^(K))`, tight for uniform cardinality.
pub fn residual_bounds(seed: u64, instances: usize) -> Result<ResidualCheck> {
    let seed = Seed::new(seed);
    let rows: Vec<(bool, bool, f64)> = (0..instances)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed.stream(RESIDUAL_STREAM, t as u64, purpose::FEATURES);
            let l = rng.random_range(2..=10);
            let n = rng.random_range(l.max(20)..=200);
            let d = rng.random_range(2..=30);
            let scheme = random_scheme(l, &mut rng)?;
            let uniform = matches!(scheme.kind, SchemeKind::Uniform { k } if k > 1);
            let ds = random_dataset(n, d, &scheme, &mut rng)?;
            let ss = build_scatter(&ds)?;
            let b = residual_bound(&ds, &ss);
            let gap = if b.rhs > 0.0 { (b.lhs - b.rhs).abs() / b.rhs } else { b.lhs };
            Ok((b.holds(), uniform, gap))
        })
        .collect::<Result<_>>()?;
    let violations = rows.iter().filter(|r| !r.0).count();
    let uniform: Vec<f64> = rows.iter().filter(|r| r.1).map(|r| r.2).collect();
    let max_uniform_gap = uniform.iter().copied().fold(0.0, f64::max);
    Ok(ResidualCheck {
        instances,
        uniform_instances: uniform.len(),
        violations,
        max_uniform_gap,
        passed: violations == 0 && !uniform.is_empty() && max_uniform_gap <= 1e-8,
    })
}

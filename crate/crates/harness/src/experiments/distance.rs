use mlda_core::bounds::{distance_budget_with, jaccard_lower};
use mlda_core::discriminant::top_eigenspace;
use mlda_core::scatter::build_scatter;
use mlda_core::synth::{gen_labels, noise_matrix, purpose};
use nalgebra::DMatrix;
use serde::Serialize;

use super::{label_vector, par_trials, random_pair, sample, Ctx};
use crate::checks::residual_bounds;
use crate::config::{label_scheme, DistanceConfig};
use crate::error::Result;
use crate::report::{ExperimentReport, Table};
use crate::stats::mean_se;

#[derive(Debug, Clone, Serialize)]
struct PairOutcome {
    mean: f64,
    se: f64,
    lower: f64,
    upper: f64,
    jaccard: f64,
    hamming_pass: bool,
    jaccard_pass: bool,
}

pub(super) fn run(cfg: &DistanceConfig, ctx: &Ctx) -> Result<ExperimentReport> {
    let r = cfg.r_max.min(cfg.l);
    let mut table = Table::new(&["Setting", "Hamming", "Jaccard"]);
    let mut failing = Vec::new();
    let mut misses = Vec::new();
    for (si, s) in cfg.settings.iter().enumerate() {
        let block = si as u64;
        let scheme = label_scheme(&s.scheme, cfg.l)?;
        let labels = gen_labels(&scheme, cfg.n, &mut ctx.rng(block, 0, purpose::LABELS))?;
        let params = cfg.model.build(cfg.d, cfg.l, &mut ctx.rng(block, 0, purpose::EFFECTS))?;
        let ds = sample(&labels, &params, 0.0, &mut ctx.rng(block, 0, purpose::NOISE))?;
        let ss = build_scatter(&ds)?;
        let w = top_eigenspace(&ss.sb, r)?.frame.into_columns();
        let wt = w.transpose();

        let pairs = par_trials(cfg.pairs, |p| {
            let p = p as u64;
            let (i, j) = random_pair(cfg.n, &mut ctx.rng(block, p + 1, purpose::PAIRS));
            let (yi, yj) = (labels.row(i), labels.row(j));
            let budget = distance_budget_with(&w, &params.a, yi, yj, params.sigma_w(), cfg.sigma_min)?;
            let jac = jaccard_lower(&budget, yi, yj)?;
            let mut rng = ctx.rng(block, p + 1, purpose::NOISE);
            let e: DMatrix<f64> = (noise_matrix(cfg.draws, &params, &mut rng) - noise_matrix(cfg.draws, &params, &mut rng)).transpose();
            let shift = &params.a * (label_vector(yi) - label_vector(yj));
            let (mean, se) = mean_se(&super::projected_sq(&wt, &shift, &e));
            let tol = cfg.se_mult * se;
            let jaccard = jac.weakened + budget.c_w;
            Ok(PairOutcome {
                mean,
                se,
                lower: budget.lower,
                upper: budget.upper,
                jaccard,
                hamming_pass: budget.lower - tol <= mean && mean <= budget.upper + tol,
                jaccard_pass: mean >= jaccard - tol,
            })
        })?;

        let rate = |f: fn(&PairOutcome) -> bool| pairs.iter().filter(|p| f(p)).count() as f64 / pairs.len() as f64;
        let (h, j) = (rate(|p| p.hamming_pass), rate(|p| p.jaccard_pass));
        table.push(vec![s.name.as_str().into(), (100.0 * h).into(), (100.0 * j).into()]);
        if h < cfg.min_pass_rate || j < cfg.min_pass_rate {
            failing.push(format!("{}: Hamming {:.1}%, Jaccard {:.1}%", s.name, 100.0 * h, 100.0 * j));
        }
        misses.extend(
            pairs
                .iter()
                .enumerate()
                .filter(|(_, p)| !p.hamming_pass || !p.jaccard_pass)
                .map(|(k, p)| serde_json::json!({"setting": s.name, "pair": k, "outcome": p})),
        );
    }

    let mut report = ctx.report(table);
    report.note("missed_pairs", &misses);
    report.flag("6", failing.is_empty(), || failing.join("; "));

    let res = residual_bounds(ctx.seed.base, cfg.residual_instances)?;
    report.note("residual_bound", &res);
    report.flag("4", res.passed, || {
        format!(
            "{} violations, uniform gap {:e} over {} uniform instances",
            res.violations, res.max_uniform_gap, res.uniform_instances
        )
    });
    Ok(report)
}

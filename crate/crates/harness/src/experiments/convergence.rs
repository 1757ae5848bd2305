use mlda_core::discriminant::{opt_td, td_matrix, top_eigenspace};
use mlda_core::scatter::{build_scatter, Dataset};
use mlda_core::spectral::principal_angle_sin;
use mlda_core::synth::{gen_labels, noise_matrix, purpose, signal_matrix};
use serde::Serialize;

use super::{par_trials, Ctx};
use crate::config::{label_scheme, ConvergenceConfig};
use crate::error::{config_err, Result};
use crate::report::{ExperimentReport, Table};
use crate::stats::{aggregate, inversions, slope_fit};

#[derive(Debug, Serialize)]
struct RankChoice {
    r: usize,
    per_sample_gaps: Vec<f64>,
    adaptive: bool,
}

pub(super) fn run(cfg: &ConvergenceConfig, ctx: &Ctx) -> Result<ExperimentReport> {
    let n_max = *cfg.n_grid.last().expect("validated grid");
    let scheme = label_scheme(&cfg.scheme, cfg.l)?;
    let labels = gen_labels(&scheme, n_max, &mut ctx.rng(0, 0, purpose::LABELS))?;
    let params = cfg.model.build(cfg.d, cfg.l, &mut ctx.rng(0, 0, purpose::EFFECTS))?;
    let signal = signal_matrix(&labels, &params, 0.0)?;

    // Noiseless scatter of each prefix.
    let clean = |n: usize| -> Result<_> {
        let ds = Dataset::new(signal.rows(0, n).into_owned(), labels.prefix(n)?)?;
        let ss = build_scatter(&ds)?;
        Ok(td_matrix(&ss.sb, &ss.st_ml))
    };
    let reference = clean(n_max)?;
    let eig = reference.eig();
    let per_sample_gaps: Vec<f64> = (1..cfg.d.min(cfg.l + 1)).map(|k| eig.gap(k).map(|g| g / n_max as f64)).collect::<std::result::Result<_, _>>()?;
    let choice = match cfg.r {
        Some(r) => RankChoice { r, per_sample_gaps, adaptive: false },
        None => match per_sample_gaps.iter().rposition(|&g| g > cfg.gap_threshold) {
            Some(k) => RankChoice { r: k + 1, per_sample_gaps, adaptive: true },
            None => return config_err(format!("no per-sample gap exceeds {}", cfg.gap_threshold)),
        },
    };
    let r = choice.r;
    let w_ref = top_eigenspace(&reference, r)?.frame;

    let mut table = Table::new(&["n", "Median sin∠", "95th pctile", "Drift"]);
    let mut medians = Vec::new();
    let mut per_n = Vec::new();
    for (ni, &n) in cfg.n_grid.iter().enumerate() {
        let target = top_eigenspace(&clean(n)?, r)?;
        let drift = principal_angle_sin(&target.frame, &w_ref)?;
        let y = labels.prefix(n)?;
        let x0 = signal.rows(0, n).into_owned();
        let errors = par_trials(cfg.trials, |t| {
            let noise = noise_matrix(n, &params, &mut ctx.rng(ni as u64, t as u64, purpose::NOISE));
            let ds = Dataset::new(&x0 + noise, y.clone())?;
            let est = opt_td(&build_scatter(&ds)?, r)?;
            Ok((t, principal_angle_sin(&est.frame, &target.frame)?))
        })?;
        let s = aggregate(&errors)?;
        table.push(vec![n.into(), s.median.into(), s.p95.into(), drift.into()]);
        medians.push(s.median);
        per_n.push(serde_json::json!({"n": n, "summary": s, "target_gap": target.gap, "target_degenerate": target.degenerate}));
    }

    let ns: Vec<f64> = cfg.n_grid.iter().map(|&n| n as f64).collect();
    let slope = slope_fit(&ns, &medians)?;
    let inv = inversions(&medians);
    let last = *medians.last().expect("non-empty grid");

    let mut report = ctx.report(table);
    report.note("rank", &choice);
    report.note("slope", slope);
    report.note("inversions", inv);
    report.note("per_n", &per_n);
    let mut why = Vec::new();
    if last > cfg.max_final_median {
        why.push(format!("median {last:.4} at n={n_max} above {}", cfg.max_final_median));
    }
    if inv > cfg.max_inversions {
        why.push(format!("{inv} inversions"));
    }
    if !(cfg.slope_range.0..=cfg.slope_range.1).contains(&slope) {
        why.push(format!("slope {slope:.3} outside [{}, {}]", cfg.slope_range.0, cfg.slope_range.1));
    }
    report.flag("7", why.is_empty(), || why.join("; "));
    Ok(report)
}

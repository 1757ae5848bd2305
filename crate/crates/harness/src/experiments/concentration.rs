use mlda_core::bounds::{concentration_interval, tail_params, tail_params_stml, TailParams};
use mlda_core::discriminant::{opt_stml, top_eigenspace};
use mlda_core::population::population_scatters;
use mlda_core::scatter::build_scatter;
use mlda_core::synth::{gen_labels, noise_matrix, purpose};
use serde::Serialize;

use super::{label_vector, par_trials, random_pair, sample, Ctx};
use crate::config::{label_scheme, ConcentrationConfig};
use crate::error::Result;
use crate::report::{ExperimentReport, Table};
use crate::stats::{mean_se, nearest_rank};

#[derive(Debug, Clone, Serialize)]
struct PairStats {
    covered: Vec<usize>,
    signal: f64,
    linear_var: f64,
    linear_var_pred: f64,
    linear_z: f64,
    quadratic_z: f64,
    tail_ratio: f64,
    psi_norm2_stml: f64,
    theta_in_range: bool,
}

pub(super) fn run(cfg: &ConcentrationConfig, ctx: &Ctx) -> Result<ExperimentReport> {
    let scheme = label_scheme(&cfg.scheme, cfg.l)?;
    let labels = gen_labels(&scheme, cfg.n, &mut ctx.rng(0, 0, purpose::LABELS))?;
    let params = cfg.model.build(cfg.d, cfg.l, &mut ctx.rng(0, 0, purpose::EFFECTS))?;
    let ds = sample(&labels, &params, 0.0, &mut ctx.rng(0, 0, purpose::NOISE))?;
    let w = top_eigenspace(&build_scatter(&ds)?.sb, cfg.r)?.frame.into_columns();
    let wt = w.transpose();
    let pop = population_scatters(&params, &scheme.distribution()?)?;
    let w_pop = opt_stml(&pop.sb_pop, &pop.st_ml_pop, cfg.r, 0.0)?.w;
    let psi_cap = 1.0 / pop.st_ml_pop.eig().lambda_min();

    let pairs = par_trials(cfg.pairs, |p| {
        let p = p as u64 + 1;
        let (i, j) = random_pair(cfg.n, &mut ctx.rng(0, p, purpose::PAIRS));
        let (yi, yj) = (labels.row(i), labels.row(j));
        let tail = tail_params(&w, &params.a, yi, yj, params.sigma_w())?;
        let widths = cfg
            .deltas
            .iter()
            .map(|&d| concentration_interval(&tail, d, cfg.c_scale))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let stml = tail_params_stml(&w_pop, &params.a, yi, yj, params.sigma_w(), &pop)?;

        let mut rng = ctx.rng(0, p, purpose::NOISE);
        let e = (noise_matrix(cfg.draws, &params, &mut rng) - noise_matrix(cfg.draws, &params, &mut rng)).transpose();
        let s = &wt * &params.a * (label_vector(yi) - label_vector(yj));
        let we = &wt * e;
        let trace2 = 2.0 * tail.psi.trace();
        let mut linear = Vec::with_capacity(cfg.draws);
        let mut quadratic = Vec::with_capacity(cfg.draws);
        let mut abs_dev = Vec::with_capacity(cfg.draws);
        for c in we.column_iter() {
            let lin = 2.0 * s.dot(&c);
            let quad = c.norm_squared() - trace2;
            linear.push(lin);
            quadratic.push(quad);
            abs_dev.push((lin + quad).abs());
        }
        let covered = widths.iter().map(|&h| abs_dev.iter().filter(|&&a| a <= h).count()).collect();
        let (lm, lse) = mean_se(&linear);
        let (qm, qse) = mean_se(&quadratic);
        let n = linear.len() as f64;
        let linear_var = linear.iter().map(|v| (v - lm).powi(2)).sum::<f64>() / (n - 1.0);
        abs_dev.sort_by(f64::total_cmp);
        let z = |m: f64, se: f64| if se > 0.0 { m.abs() / se } else { 0.0 };
        Ok(PairStats {
            covered,
            signal: tail.signal,
            linear_var,
            linear_var_pred: TailParams::linear_variance(&s, &tail.psi),
            linear_z: z(lm, lse),
            quadratic_z: z(qm, qse),
            tail_ratio: nearest_rank(&abs_dev, 99.0) / nearest_rank(&abs_dev, 95.0),
            psi_norm2_stml: stml.params.psi_norm2,
            theta_in_range: stml.theta_in_range,
        })
    })?;

    let total = (cfg.pairs * cfg.draws) as f64;
    let mut table = Table::new(&["δ", "Nominal 1-δ", "Empirical coverage"]);
    let mut why = Vec::new();
    for (k, &d) in cfg.deltas.iter().enumerate() {
        let cov = pairs.iter().map(|p| p.covered[k]).sum::<usize>() as f64 / total;
        table.push(vec![d.into(), (1.0 - d).into(), cov.into()]);
        if cov < 1.0 - d {
            why.push(format!("coverage {cov:.4} below {:.2} at δ={d}", 1.0 - d));
        }
    }

    let with_signal: Vec<&PairStats> = pairs.iter().filter(|p| p.signal > 0.0).collect();
    let var_ratio = with_signal.iter().map(|p| p.linear_var).sum::<f64>() / with_signal.iter().map(|p| p.linear_var_pred).sum::<f64>();
    if with_signal.is_empty() || !((var_ratio - 1.0).abs() <= cfg.linear_var_tol) {
        why.push(format!("pooled linear variance ratio {var_ratio:.5}"));
    }
    let max_z = pairs.iter().map(|p| p.linear_z.max(p.quadratic_z)).fold(0.0, f64::max);
    if max_z > cfg.mean_se_mult {
        why.push(format!("component mean {max_z:.2} SE from zero"));
    }
    let max_tail = pairs.iter().map(|p| p.tail_ratio).fold(0.0, f64::max);
    if !(max_tail <= cfg.max_tail_ratio) {
        why.push(format!("99th/95th percentile ratio {max_tail:.3}"));
    }
    let max_psi = pairs.iter().map(|p| p.psi_norm2_stml).fold(0.0, f64::max);
    let theta_ok = pairs.iter().all(|p| p.theta_in_range);
    if !theta_ok || max_psi > psi_cap * (1.0 + 1e-12) {
        why.push(format!("projected noise {max_psi:e} against cap {psi_cap:e}, θ in range: {theta_ok}"));
    }

    let mut report = ctx.report(table);
    report.note(
        "components",
        serde_json::json!({
            "pairs_with_signal": with_signal.len(),
            "linear_variance_ratio": var_ratio,
            "max_mean_z": max_z,
            "max_tail_ratio": max_tail,
            "max_psi_norm_stml": max_psi,
            "psi_cap": psi_cap,
            "theta_in_range": theta_ok,
        }),
    );
    report.flag("9", why.is_empty(), || why.join("; "));
    Ok(report)
}

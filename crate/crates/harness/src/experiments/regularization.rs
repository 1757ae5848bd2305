use mlda_core::discriminant::{regularization_report, td_matrix, Kappa};
use mlda_core::scatter::build_scatter;
use mlda_core::synth::{gen_labels, purpose};

use super::{median, par_trials, sample, Ctx};
use crate::config::{label_scheme, RegularizationConfig};
use crate::error::Result;
use crate::report::{ExperimentReport, Table};

pub(super) fn run(cfg: &RegularizationConfig, ctx: &Ctx) -> Result<ExperimentReport> {
    let scheme = label_scheme(&cfg.scheme, cfg.l)?;
    let trials = par_trials(cfg.trials, |t| {
        let t = t as u64;
        let labels = gen_labels(&scheme, cfg.n, &mut ctx.rng(0, t, purpose::LABELS))?;
        let params = cfg.model.build(cfg.d, cfg.l, &mut ctx.rng(0, t, purpose::EFFECTS))?;
        let ds = sample(&labels, &params, 0.0, &mut ctx.rng(0, t, purpose::NOISE))?;
        let ss = build_scatter(&ds)?;
        let rows = regularization_report(&ss, &cfg.gammas, cfg.r)?;
        let scale = td_matrix(&ss.sb, &ss.st_ml).spectral_norm().max(1.0);
        let g0 = rows[0].gap_td;
        let gap_spread = rows.iter().map(|r| (r.gap_td - g0).abs()).fold(0.0, f64::max) / scale;
        Ok((rows, gap_spread))
    })?;

    let mut table = Table::new(&["γ", "rank(S_b^ML)", "κ(S_w^ML + γI)"]);
    let mut why = Vec::new();
    let mut kappas = Vec::new();
    for (gi, &gamma) in cfg.gammas.iter().enumerate() {
        let ranks: Vec<usize> = trials.iter().map(|t| t.0[gi].rank_sb).collect();
        let mut ks: Vec<f64> = trials.iter().map(|t| t.0[gi].kappa_sw_gamma.value()).collect();
        let infinite = trials.iter().filter(|t| t.0[gi].kappa_sw_gamma == Kappa::Infinite).count();
        let k = median(&mut ks);
        let rank = ranks[0];
        table.push(vec![gamma.into(), rank.into(), k.into()]);
        if ranks.iter().any(|&r| r != cfg.expected_rank) {
            why.push(format!("rank differs from {} at γ={gamma}", cfg.expected_rank));
        }
        if gamma == 0.0 && infinite != trials.len() {
            why.push(format!("κ finite in {} trials at γ=0", trials.len() - infinite));
        }
        kappas.push((gamma, k));
    }
    let finite: Vec<(f64, f64)> = kappas.iter().copied().filter(|k| k.1.is_finite()).collect();
    let ratios: Vec<f64> = finite.windows(2).map(|w| w[0].1 / w[1].1).collect();
    for (w, ratio) in finite.windows(2).zip(&ratios) {
        if !(cfg.kappa_ratio.0..=cfg.kappa_ratio.1).contains(ratio) {
            why.push(format!("κ ratio {ratio:.3} between γ={} and γ={}", w[0].0, w[1].0));
        }
    }
    let gap_spread = trials.iter().map(|t| t.1).fold(0.0, f64::max);
    if !(gap_spread <= cfg.gap_tol) {
        why.push(format!("trace-difference gap moved by {gap_spread:e} relative"));
    }

    let mut report = ctx.report(table);
    report.note("kappa_ratios", &ratios);
    report.note("max_relative_gap_spread", gap_spread);
    report.flag("11", why.is_empty(), || why.join("; "));
    Ok(report)
}

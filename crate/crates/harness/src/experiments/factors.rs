use mlda_core::discriminant::{condition_number, opt_td, td_matrix, top_eigenspace};
use mlda_core::population::{gamma_norm, gaps, population_scatters, GapReport, ModelParams};
use mlda_core::scatter::{build_scatter, Dataset, LabelMatrix};
use mlda_core::spectral::{principal_angle_sin, spectral_norm};
use mlda_core::synth::{gen_labels, noise_matrix, purpose, signal_matrix, LabelScheme, SchemeKind};
use serde::Serialize;

use super::{median, par_trials, Ctx};
use crate::config::{label_scheme, FactorsConfig};
use crate::error::Result;
use crate::report::{Cell, ExperimentReport, Table};

#[derive(Debug, Clone, Serialize)]
struct ErrorSweep {
    median_sin: f64,
    /// `λ_r − λ_{r+1}` of the noiseless trace-difference matrix.
    gap_r: f64,
    median_kappa: f64,
}

/// Median subspace error against the noiseless target over noise trials.
fn error_sweep(cfg: &FactorsConfig, ctx: &Ctx, block: u64, labels: &LabelMatrix, params: &ModelParams) -> Result<ErrorSweep> {
    let signal = signal_matrix(labels, params, 0.0)?;
    let clean = build_scatter(&Dataset::new(signal.clone(), labels.clone())?)?;
    let target = top_eigenspace(&td_matrix(&clean.sb, &clean.st_ml), cfg.r)?;
    let trials = par_trials(cfg.trials, |t| {
        let noise = noise_matrix(labels.n(), params, &mut ctx.rng(block, t as u64, purpose::NOISE));
        let ss = build_scatter(&Dataset::new(&signal + noise, labels.clone())?)?;
        let est = opt_td(&ss, cfg.r)?;
        Ok((principal_angle_sin(&est.frame, &target.frame)?, condition_number(&ss.st_ml).value()))
    })?;
    Ok(ErrorSweep {
        median_sin: median(&mut trials.iter().map(|t| t.0).collect::<Vec<_>>()),
        gap_r: target.gap,
        median_kappa: median(&mut trials.iter().map(|t| t.1).collect::<Vec<_>>()),
    })
}

const COLUMNS: [&str; 8] = ["Probe", "Setting", "k_max", "Median sin∠", "gap_r", "Ratio", "κ(S_t^ML)", "Value"];

fn blank() -> Cell {
    Cell::Text(String::new())
}

pub(super) fn run(cfg: &FactorsConfig, ctx: &Ctx) -> Result<ExperimentReport> {
    let mut table = Table::new(&COLUMNS);
    let params = cfg.model.build(cfg.d, cfg.l, &mut ctx.rng(0, 0, purpose::EFFECTS))?;
    let sigma = params.sigma();
    let a_norm = spectral_norm(&params.a);
    let (d, n) = (cfg.d as f64, cfg.n as f64);
    let rate = (d * d.ln() / n).sqrt();
    let mut why = Vec::new();

    // k_max sweep.
    let mut sweep = Vec::new();
    for (si, s) in cfg.kmax_settings.iter().enumerate() {
        let block = si as u64 + 1;
        let scheme = label_scheme(&s.scheme, cfg.l)?;
        let labels = gen_labels(&scheme, cfg.n, &mut ctx.rng(block, 0, purpose::LABELS))?;
        let e = error_sweep(cfg, ctx, block, &labels, &params)?;
        let k = labels.k_max();
        let ratio = e.median_sin * e.gap_r / ((sigma * a_norm + sigma * sigma * k as f64) * rate);
        table.push(vec![
            "k_max".into(),
            s.name.as_str().into(),
            k.into(),
            e.median_sin.into(),
            e.gap_r.into(),
            ratio.into(),
            e.median_kappa.into(),
            blank(),
        ]);
        sweep.push((k, e, ratio));
    }
    sweep.sort_by_key(|s| s.0);
    let medians: Vec<f64> = sweep.iter().map(|s| s.1.median_sin).collect();
    if medians.windows(2).any(|w| w[1] < w[0]) {
        why.push(format!("median error not non-decreasing in k_max: {medians:?}"));
    }
    let ratios: Vec<f64> = sweep.iter().map(|s| s.2).collect();
    let spread = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min);
    if !(spread <= cfg.ratio_spread) {
        why.push(format!("bound ratio spread {spread:.3} above {}", cfg.ratio_spread));
    }

    // Conditioning, reported only.
    let kappa_scheme = label_scheme(&cfg.kappa_scheme, cfg.l)?;
    let base = cfg.kmax_settings.len() as u64 + 1;
    let kappa_labels = gen_labels(&kappa_scheme, cfg.n, &mut ctx.rng(base, 0, purpose::LABELS))?;
    let mut kappa_rows = Vec::new();
    for (fi, &f) in cfg.kappa_factors.iter().enumerate() {
        let mut a = params.a.clone();
        for i in 0..cfg.r.min(cfg.d) {
            a.row_mut(i).scale_mut(f);
        }
        let p = ModelParams::new(params.mu.clone(), a, params.b_inter.clone(), params.sigma_w().clone(), params.noise)?;
        let e = error_sweep(cfg, ctx, base + 1 + fi as u64, &kappa_labels, &p)?;
        table.push(vec![
            "kappa".into(),
            format!("row scale {f}").into(),
            kappa_labels.k_max().into(),
            e.median_sin.into(),
            e.gap_r.into(),
            blank(),
            e.median_kappa.into(),
            f.into(),
        ]);
        kappa_rows.push(e);
    }
    let co_moving = kappa_rows.windows(2).all(|w| {
        (w[1].median_kappa >= w[0].median_kappa) == (w[1].median_sin >= w[0].median_sin)
    });

    // Scale invariance of the generalized gap.
    let dist_scheme = cfg
        .kmax_settings
        .iter()
        .map(|s| &s.scheme)
        .find(|s| !matches!(s, SchemeKind::Single))
        .unwrap_or(&cfg.kmax_settings[0].scheme);
    let dist = label_scheme(dist_scheme, cfg.l)?.distribution()?;
    let original = gaps(&population_scatters(&params, &dist)?, cfg.r)?;
    let rescaled = gaps(&population_scatters(&params.scaled(cfg.scale)?, &dist)?, cfg.r)?;
    let effects_only = gaps(&population_scatters(&params.with_effects_scaled(cfg.scale)?, &dist)?, cfg.r)?;
    let delta_row = |name: &str, g: &GapReport| {
        vec![
            "Delta_r".into(),
            name.into(),
            blank(),
            blank(),
            g.gap_r_m_star.into(),
            (g.gap_r_m_star / original.gap_r_m_star).into(),
            g.kappa_st_inf.into(),
            g.delta_r.into(),
        ]
    };
    table.push(delta_row("original", &original));
    table.push(delta_row(&format!("data scaled by {}", cfg.scale), &rescaled));
    table.push(delta_row(&format!("effects scaled by {}", cfg.scale), &effects_only));
    let delta_err = (rescaled.delta_r - original.delta_r).abs();
    let gap_ratio = rescaled.gap_r_m_star / original.gap_r_m_star;
    if !(delta_err <= cfg.delta_tol) {
        why.push(format!("Δ_r changed by {delta_err:e} under rescaling"));
    }
    if !((gap_ratio - cfg.scale * cfg.scale).abs() <= cfg.gap_scale_tol) {
        why.push(format!("gap_r scaled by {gap_ratio} instead of {}", cfg.scale * cfg.scale));
    }

    // Co-occurrence norm.
    let single = gen_labels(&LabelScheme::single(cfg.l), cfg.n, &mut ctx.rng(base + 100, 0, purpose::LABELS))?;
    let multi_scheme = label_scheme(&cfg.gamma_multilabel, cfg.l)?;
    let multi = gen_labels(&multi_scheme, cfg.n, &mut ctx.rng(base + 101, 0, purpose::LABELS))?;
    let g_single = gamma_norm(&single);
    let expected = *single.counts().iter().max().expect("labels") as f64 / cfg.n as f64;
    let g_multi = gamma_norm(&multi);
    for (name, g, k) in [("single-label", g_single, 1), ("multilabel", g_multi, multi.k_max())] {
        table.push(vec!["Gamma".into(), name.into(), k.into(), blank(), blank(), blank(), blank(), g.into()]);
    }
    let gamma_err = (g_single - expected).abs();
    if gamma_err > 8.0 * f64::EPSILON * expected {
        why.push(format!("single-label ‖Γ/n‖₂ {g_single} differs from max n_ℓ/n {expected}"));
    }
    if !(g_multi > g_single) {
        why.push(format!("multilabel ‖Γ/n‖₂ {g_multi} not above single-label {g_single}"));
    }

    let mut report = ctx.report(table);
    report.note("kmax_sweep", &sweep.iter().map(|s| serde_json::json!({"k_max": s.0, "sweep": s.1, "ratio": s.2})).collect::<Vec<_>>());
    report.note("ratio_spread", spread);
    report.note("kappa_error_co_moving", co_moving);
    report.note("gaps", serde_json::json!({"original": original, "scaled": rescaled, "effects_only": effects_only}));
    report.note("gamma", serde_json::json!({"single": g_single, "max_share": expected, "multilabel": g_multi}));
    report.flag("8", why.is_empty(), || why.join("; "));
    Ok(report)
}

use mlda_core::discriminant::{
    commutativity_defect, davis_kahan_check, td_matrix, top_eigenspace, trace_ratio_stiefel, TraceRatioOptions,
};
use mlda_core::spectral::{principal_angle_deg, principal_angle_sin};
use mlda_core::Error;
use mlda_core::synth::{gen_labels, purpose};
use mlda_core::scatter::build_scatter;
use serde::Serialize;

use super::{median, par_trials, sample, Ctx};
use crate::checks::objective_equivalence;
use crate::config::{label_scheme, DivergenceConfig};
use crate::error::Result;
use crate::report::{ExperimentReport, Table};

const OBJECTIVE_INSTANCES: usize = 100;
const OBJECTIVE_PROBES: usize = 1000;

#[derive(Debug, Clone, Serialize)]
struct Instance {
    defect: f64,
    td_td0_deg: f64,
    td_tr_deg: f64,
    r_norm: f64,
    gap: f64,
    /// `None` when the gap is degenerate and the bound is vacuous.
    dk_angle: Option<f64>,
    dk_bound: Option<f64>,
    dk_holds: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
struct SettingSummary {
    name: String,
    checked: usize,
    skipped: usize,
    violations: usize,
    worst_excess: f64,
}

pub(super) fn run(cfg: &DivergenceConfig, ctx: &Ctx) -> Result<ExperimentReport> {
    let mut table = Table::new(&[
        "Setting",
        "Comm. defect",
        "∠(TD,TD^0)",
        "∠(TD,TR)",
        "‖R‖₂",
        "DK holds",
    ]);
    let mut summaries = Vec::new();
    let mut single_label_angle = None;
    for (si, s) in cfg.settings.iter().enumerate() {
        let scheme = label_scheme(&s.scheme, cfg.l)?;
        let block = si as u64;
        let instances = par_trials(cfg.instances, |t| {
            let t = t as u64;
            let labels = gen_labels(&scheme, cfg.n, &mut ctx.rng(block, t, purpose::LABELS))?;
            let params = cfg.model.build(cfg.d, cfg.l, &mut ctx.rng(block, t, purpose::EFFECTS))?;
            let ds = sample(&labels, &params, 0.0, &mut ctx.rng(block, t, purpose::NOISE))?;
            let ss = build_scatter(&ds)?;
            let td = top_eigenspace(&td_matrix(&ss.sb, &ss.st_ml), cfg.r)?;
            let td0 = top_eigenspace(&td_matrix(&ss.sb, &ss.st), cfg.r)?;
            let tr = match trace_ratio_stiefel(&ss.sb, &ss.sw, cfg.r, TraceRatioOptions::default()) {
                Ok(t) => t,
                Err(Error::NotConverged { last }) => *last,
                Err(e) => return Err(e.into()),
            };
            let r_norm = ss.r.spectral_norm();
            let dk = if td0.degenerate {
                None
            } else {
                Some(davis_kahan_check(&td.frame, &td0.frame, r_norm, td0.gap)?)
            };
            Ok(Instance {
                defect: commutativity_defect(&ss.sb, &ss.st)?,
                td_td0_deg: principal_angle_sin(&td.frame, &td0.frame)?.clamp(0.0, 1.0).asin().to_degrees(),
                td_tr_deg: principal_angle_deg(&td.frame, &tr.frame)?,
                r_norm,
                gap: td0.gap,
                dk_angle: dk.map(|d| d.angle),
                dk_bound: dk.map(|d| d.bound),
                dk_holds: dk.map(|d| d.holds),
            })
        })?;

        let col = |f: fn(&Instance) -> f64| median(&mut instances.iter().map(f).collect::<Vec<_>>());
        let checked = instances.iter().filter(|i| i.dk_holds.is_some()).count();
        let violations = instances.iter().filter(|i| i.dk_holds == Some(false)).count();
        let worst_excess = instances
            .iter()
            .filter_map(|i| Some(i.dk_angle? - i.dk_bound?))
            .fold(f64::NEG_INFINITY, f64::max);
        let angle = col(|i| i.td_tr_deg);
        if matches!(s.scheme, mlda_core::synth::SchemeKind::Single) {
            single_label_angle = Some(angle);
        }
        table.push(vec![
            s.name.as_str().into(),
            col(|i| i.defect).into(),
            col(|i| i.td_td0_deg).into(),
            angle.into(),
            col(|i| i.r_norm).into(),
            format!("{}/{}", checked - violations, checked).into(),
        ]);
        summaries.push(SettingSummary {
            name: s.name.clone(),
            checked,
            skipped: instances.len() - checked,
            violations,
            worst_excess,
        });
    }

    let mut report = ctx.report(table);
    let failing: Vec<String> = summaries
        .iter()
        .filter(|s| s.violations > 0 || s.checked == 0)
        .map(|s| format!("{}: {} of {} instances exceed the bound", s.name, s.violations, s.checked))
        .collect();
    report.note("davis_kahan", &summaries);
    if let Some(a) = single_label_angle {
        report.note("single_label_td_tr_deg", a);
        report.note("single_label_td_tr_positive", a > cfg.min_single_label_angle_deg);
    }
    report.flag("5", failing.is_empty(), || failing.join("; "));

    let obj = objective_equivalence(ctx.seed.base, OBJECTIVE_INSTANCES, OBJECTIVE_PROBES)?;
    report.note("objective_equivalence", &obj);
    report.flag("3", obj.passed, || {
        format!(
            "closed-form error {:e}, {} dominating probes",
            obj.max_closed_form_error, obj.violations
        )
    });
    Ok(report)
}

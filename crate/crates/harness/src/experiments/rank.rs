use mlda_core::scatter::{build_scatter, rank_analysis};
use mlda_core::spectral::RankTol;
use mlda_core::synth::{gen_labels, purpose};

use super::{par_trials, sample, Ctx};
use crate::checks::scatter_identities;
use crate::config::{label_scheme, RankConfig};
use crate::error::Result;
use crate::report::{ExperimentReport, Table};

const IDENTITY_DATASETS: usize = 200;

pub(super) fn run(cfg: &RankConfig, ctx: &Ctx) -> Result<ExperimentReport> {
    let results = par_trials(cfg.settings.len(), |i| {
        let s = &cfg.settings[i];
        let scheme = label_scheme(&s.scheme, s.l)?;
        let labels = gen_labels(&scheme, s.n, &mut ctx.rng(i as u64, 0, purpose::LABELS))?;
        let params = cfg.model.build(s.d, s.l, &mut ctx.rng(i as u64, 0, purpose::EFFECTS))?;
        let ds = sample(&labels, &params, 0.0, &mut ctx.rng(i as u64, 0, purpose::NOISE))?;
        let ss = build_scatter(&ds)?;
        Ok(rank_analysis(&ds, &ss, RankTol::Default)?)
    })?;

    let mut table = Table::new(&["Setting", "n", "d", "L", "rank(S_b^ML)", "Excess"]);
    let mut mismatches = Vec::new();
    for (s, rep) in cfg.settings.iter().zip(&results) {
        table.push(vec![
            s.name.as_str().into(),
            s.n.into(),
            s.d.into(),
            s.l.into(),
            rep.rank_sb.into(),
            rep.excess.into(),
        ]);
        let rank_ok = s.expected_rank.is_none_or(|r| r == rep.rank_sb);
        let excess_ok = s.expected_excess.is_none_or(|e| e == rep.excess);
        if !rank_ok || !excess_ok || rep.rank_sb > rep.bound {
            mismatches.push(format!(
                "{} (n={}, d={}, L={}): rank {} excess {} bound {}",
                s.name, s.n, s.d, s.l, rep.rank_sb, rep.excess, rep.bound
            ));
        }
    }
    let mut report = ctx.report(table);
    report.note("rank_reports", &results);
    report.flag("1", mismatches.is_empty(), || mismatches.join("; "));

    let ids = scatter_identities(ctx.seed.base, IDENTITY_DATASETS)?;
    report.note("scatter_identities", &ids);
    report.flag("2", ids.passed, || {
        format!(
            "partition {:e}, factorization {:e}, residual min eigenvalue {:e}",
            ids.max_partition, ids.max_factorization, ids.min_residual_eig
        )
    });
    Ok(report)
}

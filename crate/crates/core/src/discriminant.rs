//! The four Fisher objectives and their optimizers.
//!
//! Under `WᵀS_tW = I` all four objectives are maximized by the top
//! generalized eigenvectors of `(S_b, S_t)`. Under the Stiefel constraint
//! only the trace difference reduces to a plain eigenproblem; the trace ratio
//! is solved by the usual `λ`-iteration.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::scatter::ScatterSet;
use crate::spectral::{
    inv_sqrt_pd, numeric_rank, orthonormalize, principal_angle_sin, Frame, RankTol, SymMatrix,
};

/// Log-determinants below `ln(1e-300)` count as vanishing.
const LOG_DET_FLOOR: f64 = -690.775_527_898_213_7;

/// Whitening floor relative to `λ_max`.
const WHITENING_FLOOR: f64 = 1e-12;

/// Determinant ratio, with the degenerate cases kept apart from finite values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DetRatio {
    Finite { value: f64, log: f64 },
    /// `|WᵀS_bW|` underflows; the ratio is zero.
    NumeratorVanishes,
    /// `|WᵀS_wW|` underflows; the ratio is unbounded.
    DenominatorVanishes,
}

impl DetRatio {
    pub fn value(&self) -> Option<f64> {
        match *self {
            DetRatio::Finite { value, .. } => Some(value),
            DetRatio::NumeratorVanishes => Some(0.0),
            DetRatio::DenominatorVanishes => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectiveValues {
    pub j_tr: f64,
    /// `None` when `WᵀS_wW` is singular.
    pub j_rt: Option<f64>,
    pub j_dr: DetRatio,
    pub j_td: f64,
}

fn log_det_psd(m: &SymMatrix) -> Option<f64> {
    let eig = m.eig();
    if eig.lambda_min() <= 0.0 {
        return None;
    }
    let ld: f64 = eig.values.iter().map(|v| v.ln()).sum();
    (ld >= LOG_DET_FLOOR).then_some(ld)
}

/// Evaluates the trace ratio, ratio trace, determinant ratio and trace
/// difference at a full-column-rank `W`.
pub fn eval_objectives(w: &DMatrix<f64>, sb: &SymMatrix, sw: &SymMatrix) -> Result<ObjectiveValues> {
    let (d, r) = w.shape();
    if r == 0 || d != sb.dim() || d != sw.dim() {
        return invalid(format!(
            "projection {d}x{r} incompatible with scatters of dimension {}",
            sb.dim()
        ));
    }
    let rank = numeric_rank(w, RankTol::Default)?;
    if rank < r {
        return Err(Error::RankDeficient { rank, expected: r });
    }
    let b = sb.compress(w)?;
    let s = sw.compress(w)?;
    let (tb, ts) = (b.trace(), s.trace());

    let j_rt = s
        .matrix()
        .clone()
        .cholesky()
        .filter(|_| s.eig().lambda_min() > 0.0)
        .map(|c| c.solve(b.matrix()).trace());
    let j_dr = match (log_det_psd(&b), log_det_psd(&s)) {
        (_, None) => DetRatio::DenominatorVanishes,
        (None, Some(_)) => DetRatio::NumeratorVanishes,
        (Some(lb), Some(ls)) => DetRatio::Finite {
            value: (lb - ls).exp(),
            log: lb - ls,
        },
    };
    Ok(ObjectiveValues {
        j_tr: tb / ts,
        j_rt,
        j_dr,
        j_td: tb - ts,
    })
}

/// Closed-form objective values at a `W` with `WᵀS_tW = I` and
/// `WᵀS_bW` having eigenvalues `θ`.
pub fn theta_forms(theta: &[f64]) -> ObjectiveValues {
    let r = theta.len() as f64;
    let sum: f64 = theta.iter().sum();
    let j_rt: f64 = theta.iter().map(|t| t / (1.0 - t)).sum();
    let log: f64 = theta.iter().map(|t| (t / (1.0 - t)).ln()).sum();
    let j_dr = if theta.iter().any(|&t| t <= 0.0) || log < LOG_DET_FLOOR {
        DetRatio::NumeratorVanishes
    } else {
        DetRatio::Finite { value: log.exp(), log }
    };
    ObjectiveValues {
        j_tr: sum / (r - sum),
        j_rt: Some(j_rt),
        j_dr,
        j_td: 2.0 * sum - r,
    }
}

/// Leading eigenspace of a symmetric matrix with its gap.
#[derive(Debug, Clone)]
pub struct TopEigenspace {
    pub frame: Frame,
    pub eigenvalues: Vec<f64>,
    /// `λ_r − λ_{r+1}`; infinite when `r = d`.
    pub gap: f64,
    /// The gap vanishes within `1e-12·max(1, |λ_1|)`; the frame is then one
    /// of several equally optimal choices.
    pub degenerate: bool,
}

pub fn top_eigenspace(m: &SymMatrix, r: usize) -> Result<TopEigenspace> {
    let eig = m.eig();
    let frame = eig.top_frame(r)?;
    let gap = if r < m.dim() { eig.gap(r)? } else { f64::INFINITY };
    let scale = eig.values.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    Ok(TopEigenspace {
        frame,
        eigenvalues: eig.values.iter().copied().collect(),
        gap,
        degenerate: gap <= 1e-12 * scale,
    })
}

/// Trace-difference optimizer on the Stiefel manifold: the top `r`
/// eigenvectors of `2S_b − S_t^ML`.
pub fn opt_td(ss: &ScatterSet, r: usize) -> Result<TopEigenspace> {
    top_eigenspace(&td_matrix(&ss.sb, &ss.st_ml), r)
}

/// `2S_b − S_t`.
pub fn td_matrix(sb: &SymMatrix, st: &SymMatrix) -> SymMatrix {
    &sb.scaled(2.0) - st
}

/// Common optimizer under `Wᵀ(S_t + γI)W = I`.
#[derive(Debug, Clone)]
pub struct StmlSolution {
    /// `(S_t + γI)^{-1/2} V_r`. Not orthonormal.
    pub w: DMatrix<f64>,
    /// All generalized eigenvalues of `(S_b, S_t + γI)`, descending.
    pub theta: Vec<f64>,
    /// Orthonormal basis of `col(w)`, for angle computations.
    pub span: Frame,
}

impl StmlSolution {
    pub fn top_theta(&self) -> &[f64] {
        &self.theta[..self.w.ncols()]
    }
}

pub fn opt_stml(sb: &SymMatrix, st_total: &SymMatrix, r: usize, gamma: f64) -> Result<StmlSolution> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return invalid(format!("ridge must be a finite non-negative number, got {gamma}"));
    }
    if sb.dim() != st_total.dim() {
        return invalid("scatter dimensions differ");
    }
    let s = st_total.shifted(gamma);
    let whiten = inv_sqrt_pd(&s, WHITENING_FLOOR)?;
    let p = sb.compress(&whiten)?;
    let eig = p.eig();
    let v = eig.top_frame(r)?;
    let w = &whiten * v.columns();
    let span = orthonormalize(&w)?;
    Ok(StmlSolution {
        w,
        theta: eig.values.iter().copied().collect(),
        span,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRatioResult {
    #[serde(skip)]
    pub frame: Frame,
    pub lambda_star: f64,
    pub iterations: usize,
    /// `|Σ_{i≤r} λ_i(S_b − λ*S_w)| / max(1, ‖S_b‖₂)`.
    pub residual: f64,
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRatioOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TraceRatioOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
        }
    }
}

fn trace_ratio_at(w: &DMatrix<f64>, sb: &SymMatrix, sw: &SymMatrix) -> Result<f64> {
    let den = sw.compress(w)?.trace();
    if !(den > 0.0) {
        return invalid("projected within-class scatter has zero trace");
    }
    Ok(sb.compress(w)?.trace() / den)
}

/// Maximizes `tr(WᵀS_bW)/tr(WᵀS_wW)` over `W ∈ St(d, r)`.
///
/// Starts from the top `r` eigenvectors of `S_b`, then alternates
/// `λ ← ratio(W)` and `W ← top_r(S_b − λS_w)`. Stops when successive `λ`
/// differ by at most `tol·max(1, |λ|)`.
pub fn trace_ratio_stiefel(
    sb: &SymMatrix,
    sw: &SymMatrix,
    r: usize,
    opts: TraceRatioOptions,
) -> Result<TraceRatioResult> {
    if sb.dim() != sw.dim() {
        return invalid("scatter dimensions differ");
    }
    let mut frame = sb.eig().top_frame(r)?;
    let mut lambda = trace_ratio_at(frame.columns(), sb, sw)?;
    let mut history = vec![lambda];
    let sb_norm = sb.spectral_norm().max(1.0);

    for it in 1..=opts.max_iter {
        let next_frame = (sb - &sw.scaled(lambda)).eig().top_frame(r)?;
        let next = trace_ratio_at(next_frame.columns(), sb, sw)?;
        if next < lambda - 1e-10 * lambda.abs().max(1.0) {
            return Err(Error::Inconsistent(format!(
                "trace ratio decreased from {lambda} to {next} at iteration {it}"
            )));
        }
        history.push(next);
        let step = (next - lambda).abs();
        frame = next_frame;
        lambda = next;
        if step <= opts.tol * lambda.abs().max(1.0) {
            let vals = (sb - &sw.scaled(lambda)).eig().values;
            let f: f64 = vals.iter().take(r).sum();
            return Ok(TraceRatioResult {
                frame,
                lambda_star: lambda,
                iterations: it,
                residual: f.abs() / sb_norm,
                history,
            });
        }
    }
    let vals = (sb - &sw.scaled(lambda)).eig().values;
    let f: f64 = vals.iter().take(r).sum();
    Err(Error::NotConverged {
        last: Box::new(TraceRatioResult {
            frame,
            lambda_star: lambda,
            iterations: opts.max_iter,
            residual: f.abs() / sb_norm,
            history,
        }),
    })
}

/// `‖S_bS_t − S_tS_b‖_F / (‖S_b‖_F‖S_t‖_F)`, zero if either matrix is zero.
pub fn commutativity_defect(sb: &SymMatrix, st: &SymMatrix) -> Result<f64> {
    if sb.dim() != st.dim() {
        return invalid("matrix dimensions differ");
    }
    let denom = sb.frobenius_norm() * st.frobenius_norm();
    if denom == 0.0 {
        return Ok(0.0);
    }
    let (a, b) = (sb.matrix(), st.matrix());
    Ok((a * b - b * a).norm() / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DavisKahan {
    /// `sin∠(Û, U)`.
    pub angle: f64,
    /// `‖E‖₂ / gap`.
    pub bound: f64,
    pub holds: bool,
}

pub fn davis_kahan_check(u_hat: &Frame, u_ref: &Frame, pert_norm: f64, gap: f64) -> Result<DavisKahan> {
    if !(gap > 0.0) {
        return Err(Error::InvalidGap(gap));
    }
    if !(pert_norm >= 0.0) {
        return invalid(format!("perturbation norm must be non-negative, got {pert_norm}"));
    }
    let angle = principal_angle_sin(u_hat, u_ref)?;
    let bound = pert_norm / gap;
    Ok(DavisKahan {
        angle,
        bound,
        holds: angle <= bound * (1.0 + 1e-8) + 1e-12 || bound >= 1.0,
    })
}

/// Condition number that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Kappa {
    Finite(f64),
    Infinite,
}

impl Kappa {
    pub fn value(&self) -> f64 {
        match *self {
            Kappa::Finite(v) => v,
            Kappa::Infinite => f64::INFINITY,
        }
    }
}

/// `λ_max/λ_min`, infinite when `λ_min ≤ d·ε·λ_max`.
pub fn condition_number(s: &SymMatrix) -> Kappa {
    let eig = s.eig();
    let (hi, lo) = (eig.lambda_max(), eig.lambda_min());
    if lo <= s.dim() as f64 * f64::EPSILON * hi.abs() {
        Kappa::Infinite
    } else {
        Kappa::Finite(hi / lo)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularizationRow {
    pub gamma: f64,
    pub rank_sb: usize,
    pub kappa_sw_gamma: Kappa,
    /// `λ_r − λ_{r+1}` of `2S_b − (S_t^ML + γI)`.
    pub gap_td: f64,
}

/// Rank, within-class conditioning and trace-difference gap per ridge value.
pub fn regularization_report(ss: &ScatterSet, gammas: &[f64], r: usize) -> Result<Vec<RegularizationRow>> {
    gammas
        .iter()
        .map(|&gamma| {
            if !(gamma >= 0.0) {
                return invalid(format!("ridge must be non-negative, got {gamma}"));
            }
            let st_gamma = ss.st_ml.shifted(gamma);
            let gap_td = td_matrix(&ss.sb, &st_gamma).eig().gap(r)?;
            Ok(RegularizationRow {
                gamma,
                rank_sb: numeric_rank(ss.sb.matrix(), RankTol::Default)?,
                kappa_sw_gamma: condition_number(&ss.sw.shifted(gamma)),
                gap_td,
            })
        })
        .collect()
}

/// Whether the trace-difference and trace-ratio scalings `2S_b − S_t` and
/// `S_b − λ*S_w` pick the same top `r` eigenspace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderingCheck {
    pub angle: f64,
    pub consistent: bool,
}

pub fn ordering_consistency(sb: &SymMatrix, sw: &SymMatrix, lambda_star: f64, r: usize) -> Result<OrderingCheck> {
    let st = sb + sw;
    let td = top_eigenspace(&td_matrix(sb, &st), r)?;
    let tr = top_eigenspace(&(sb - &sw.scaled(lambda_star)), r)?;
    let angle = principal_angle_sin(&td.frame, &tr.frame)?;
    Ok(OrderingCheck {
        angle,
        consistent: angle <= 1e-8,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::RankTol;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
    }

    fn random_psd(d: usize, rank: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        let g = gaussian(d, rank, rng);
        SymMatrix::gram_of_rows(&g)
    }

    fn random_pd(d: usize, rng: &mut ChaCha8Rng) -> SymMatrix {
        random_psd(d, d + 2, rng).shifted(0.1)
    }

    fn random_frame(d: usize, r: usize, rng: &mut ChaCha8Rng) -> Frame {
        orthonormalize(&gaussian(d, r, rng)).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn equal_scatters() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = random_pd(5, &mut rng);
        let w = random_frame(5, 2, &mut rng);
        let j = eval_objectives(w.columns(), &s, &s).unwrap();
        assert!((j.j_tr - 1.0).abs() < 1e-12);
        assert!((j.j_rt.unwrap() - 2.0).abs() < 1e-12);
        assert!(j.j_td.abs() < 1e-12);
        assert!((j.j_dr.value().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn known_theta_values() {
        // S_b = diag(.5, .25, 0), S_t = I, W = first two axes.
        let sb = SymMatrix::from_diagonal(&[0.5, 0.25, 0.0]).unwrap();
        let sw = &SymMatrix::identity(3) - &sb;
        let w = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let j = eval_objectives(&w, &sb, &sw).unwrap();
        assert!((j.j_td + 0.5).abs() < 1e-15);
        assert!((j.j_rt.unwrap() - (1.0 + 1.0 / 3.0)).abs() < 1e-15);
        let t = theta_forms(&[0.5, 0.25]);
        assert!((t.j_td - j.j_td).abs() < 1e-15);
        assert!((t.j_tr - j.j_tr).abs() < 1e-15);
        assert!((t.j_dr.value().unwrap() - j.j_dr.value().unwrap()).abs() < 1e-15);
    }

    #[test]
    fn ratio_trace_matches_explicit_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let sb = random_psd(6, 3, &mut rng).shifted(0.5);
            let sw = random_pd(6, &mut rng);
            let w = gaussian(6, 3, &mut rng);
            let j = eval_objectives(&w, &sb, &sw).unwrap();
            let b = w.transpose() * sb.matrix() * &w;
            let s = w.transpose() * sw.matrix() * &w;
            let direct = (s.clone().try_inverse().unwrap() * &b).trace();
            assert!(rel(j.j_rt.unwrap(), direct) <= 1e-10);
            let dr = b.determinant() / s.determinant();
            assert!(rel(j.j_dr.value().unwrap(), dr) <= 1e-9, "{:?} vs {dr}", j.j_dr);
        }
    }

    #[test]
    fn singular_within_scatter_is_flagged() {
        let sb = SymMatrix::identity(3);
        let sw = SymMatrix::from_diagonal(&[1.0, 0.0, 0.0]).unwrap();
        let w = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 0.0]);
        let j = eval_objectives(&w, &sb, &sw).unwrap();
        assert!(j.j_rt.is_none());
        assert_eq!(j.j_dr, DetRatio::DenominatorVanishes);
        let sb = SymMatrix::from_diagonal(&[0.0, 0.0, 1.0]).unwrap();
        let j = eval_objectives(&w, &sb, &SymMatrix::identity(3)).unwrap();
        assert_eq!(j.j_dr, DetRatio::NumeratorVanishes);
        assert_eq!(j.j_dr.value(), Some(0.0));
    }

    #[test]
    fn rank_deficient_projection_rejected() {
        let w = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let s = SymMatrix::identity(3);
        assert!(matches!(eval_objectives(&w, &s, &s), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn td_diagonal_case() {
        let sb = SymMatrix::from_diagonal(&[0.1, 3.0, 0.2, 2.0]).unwrap();
        let top = top_eigenspace(&td_matrix(&sb, &SymMatrix::identity(4)), 2).unwrap();
        let p = top.frame.projector();
        assert!((p[(1, 1)] - 1.0).abs() < 1e-14 && (p[(3, 3)] - 1.0).abs() < 1e-14);
        assert!((top.gap - 3.6).abs() < 1e-12);
        assert!(!top.degenerate);
    }

    #[test]
    fn degenerate_gap_flagged() {
        let sb = SymMatrix::from_diagonal(&[2.0, 1.0, 1.0]).unwrap();
        let top = top_eigenspace(&sb, 2).unwrap();
        assert!(top.degenerate);
        assert_eq!(top.frame.rank(), 2);
    }

    #[test]
    fn td_ky_fan_random_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sb = random_psd(6, 3, &mut rng);
        let sw = random_pd(6, &mut rng);
        let st = &sb + &sw;
        let m = td_matrix(&sb, &st);
        let top = top_eigenspace(&m, 2).unwrap();
        let best = m.compress(top.frame.columns()).unwrap().trace();
        let opt = eval_objectives(top.frame.columns(), &sb, &sw).unwrap().j_td;
        assert!((best - opt).abs() <= 1e-10 * best.abs().max(1.0));
        for _ in 0..10_000 {
            let w = random_frame(6, 2, &mut rng);
            let j = eval_objectives(w.columns(), &sb, &sw).unwrap().j_td;
            assert!(j <= opt + 1e-10 * opt.abs().max(1.0));
        }
    }

    #[test]
    fn stml_identity_total_scatter() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sb = random_psd(5, 2, &mut rng);
        let sol = opt_stml(&sb, &SymMatrix::identity(5), 2, 0.0).unwrap();
        let plain = sb.eig().top_frame(2).unwrap();
        assert!(principal_angle_sin(&sol.span, &plain).unwrap() < 1e-10);
        assert!((&sol.w - plain.columns()).norm() < 1e-10);
    }

    #[test]
    fn stml_constraint_and_theta_forms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let d = rng.random_range(3..8);
            let r = rng.random_range(1..d);
            let sb = random_psd(d, r + 1, &mut rng);
            let sw = random_pd(d, &mut rng);
            let st = &sb + &sw;
            let sol = opt_stml(&sb, &st, r, 0.0).unwrap();
            let c = st.compress(&sol.w).unwrap();
            assert!((c.matrix() - DMatrix::<f64>::identity(r, r)).norm() <= 1e-8);
            let j = eval_objectives(&sol.w, &sb, &sw).unwrap();
            let t = theta_forms(sol.top_theta());
            assert!(rel(j.j_td, t.j_td) <= 1e-8 || (j.j_td - t.j_td).abs() <= 1e-10);
            assert!(rel(j.j_tr, t.j_tr) <= 1e-8);
            assert!(rel(j.j_rt.unwrap(), t.j_rt.unwrap()) <= 1e-8);
            assert!(rel(j.j_dr.value().unwrap(), t.j_dr.value().unwrap()) <= 1e-8);
        }
    }

    /// Roots of the cubic `det(S_b − θS_t) = 0` by bisection on sign changes.
    fn cubic_roots(sb: &DMatrix<f64>, st: &DMatrix<f64>) -> Vec<f64> {
        let f = |t: f64| (sb - st * t).determinant();
        let grid = 20_000;
        let mut roots = Vec::new();
        let (lo, hi) = (-0.5, 1.5);
        for k in 0..grid {
            let a = lo + (hi - lo) * k as f64 / grid as f64;
            let b = lo + (hi - lo) * (k + 1) as f64 / grid as f64;
            let (fa, fb) = (f(a), f(b));
            if fa == 0.0 {
                roots.push(a);
            } else if fa * fb < 0.0 {
                let (mut x, mut y) = (a, b);
                for _ in 0..200 {
                    let m = 0.5 * (x + y);
                    if f(x) * f(m) <= 0.0 {
                        y = m;
                    } else {
                        x = m;
                    }
                }
                roots.push(0.5 * (x + y));
            }
        }
        roots.sort_by(|a, b| b.total_cmp(a));
        roots
    }

    #[test]
    fn stml_theta_matches_characteristic_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5 {
            let sb = random_pd(3, &mut rng);
            let sw = random_pd(3, &mut rng);
            let st = &sb + &sw;
            let sol = opt_stml(&sb, &st, 1, 0.0).unwrap();
            let roots = cubic_roots(sb.matrix(), st.matrix());
            assert_eq!(roots.len(), 3);
            for (a, b) in sol.theta.iter().zip(&roots) {
                assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn stml_singular_total_scatter() {
        let sb = SymMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        let st = SymMatrix::from_diagonal(&[2.0, 0.0]).unwrap();
        assert!(matches!(opt_stml(&sb, &st, 1, 0.0), Err(Error::SingularTotalScatter { .. })));
        let sol = opt_stml(&sb, &st, 1, 0.5).unwrap();
        let c = st.shifted(0.5).compress(&sol.w).unwrap();
        assert!((c.matrix()[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stml_positive_det_ratio_at_full_rank() {
        let sb = SymMatrix::from_diagonal(&[3.0, 2.0, 0.0]).unwrap();
        let sw = SymMatrix::identity(3);
        let sol = opt_stml(&sb, &(&sb + &sw), 2, 0.0).unwrap();
        let j = eval_objectives(&sol.w, &sb, &sw).unwrap();
        assert!(j.j_dr.value().unwrap() > 0.0);
    }

    #[test]
    fn trace_ratio_proportional_scatters() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let sw = random_pd(5, &mut rng);
        let sb = sw.scaled(2.5);
        let res = trace_ratio_stiefel(&sb, &sw, 2, TraceRatioOptions::default()).unwrap();
        assert!((res.lambda_star - 2.5).abs() < 1e-12);
        assert!(res.residual <= 1e-10);
    }

    #[test]
    fn trace_ratio_diagonal_matches_subset_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let d = rng.random_range(2..=8);
            let r = rng.random_range(1..d);
            let s: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..5.0)).collect();
            let w: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..3.0)).collect();
            let sb = SymMatrix::from_diagonal(&s).unwrap();
            let sw = SymMatrix::from_diagonal(&w).unwrap();
            let res = trace_ratio_stiefel(&sb, &sw, r, TraceRatioOptions::default()).unwrap();
            let mut best = f64::NEG_INFINITY;
            for mask in 0u32..(1 << d) {
                if mask.count_ones() as usize != r {
                    continue;
                }
                let (mut a, mut b) = (0.0, 0.0);
                for i in 0..d {
                    if mask & (1 << i) != 0 {
                        a += s[i];
                        b += w[i];
                    }
                }
                best = best.max(a / b);
            }
            assert!(rel(res.lambda_star, best) <= 1e-10, "{} vs {best}", res.lambda_star);
            assert!(res.residual <= 1e-10);
            assert!(res.history.windows(2).all(|p| p[1] >= p[0] - 1e-12 * p[0].abs().max(1.0)));
        }
    }

    #[test]
    fn trace_ratio_dominates_random_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sb = random_psd(6, 3, &mut rng);
        let sw = random_pd(6, &mut rng);
        let res = trace_ratio_stiefel(&sb, &sw, 2, TraceRatioOptions::default()).unwrap();
        for _ in 0..2000 {
            let w = random_frame(6, 2, &mut rng);
            let j = eval_objectives(w.columns(), &sb, &sw).unwrap().j_tr;
            assert!(j <= res.lambda_star * (1.0 + 1e-10));
        }
    }

    #[test]
    fn trace_ratio_not_converged_carries_iterate() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let sb = random_psd(6, 3, &mut rng);
        let sw = random_pd(6, &mut rng);
        let opts = TraceRatioOptions { tol: 0.0, max_iter: 1 };
        match trace_ratio_stiefel(&sb, &sw, 2, opts) {
            Err(Error::NotConverged { last }) => assert_eq!(last.iterations, 1),
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }

    #[test]
    fn commutativity_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sb = random_psd(4, 2, &mut rng);
        assert_eq!(commutativity_defect(&sb, &SymMatrix::identity(4)).unwrap(), 0.0);
        let a = SymMatrix::from_diagonal(&[1.0, 2.0, 3.0]).unwrap();
        let b = SymMatrix::from_diagonal(&[5.0, 0.0, 1.0]).unwrap();
        assert_eq!(commutativity_defect(&a, &b).unwrap(), 0.0);
        let sb = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).unwrap();
        let st = SymMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 2.0])).unwrap();
        let v = commutativity_defect(&sb, &st).unwrap();
        assert!((v - (2.0f64 / 7.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn davis_kahan_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let u = random_frame(5, 2, &mut rng);
        let dk = davis_kahan_check(&u, &u, 0.0, 1.0).unwrap();
        assert!(dk.angle < 1e-12 && dk.bound == 0.0 && dk.holds);
        let v = random_frame(5, 2, &mut rng);
        assert!(davis_kahan_check(&u, &v, 3.0, 2.0).unwrap().holds);
        assert!(matches!(davis_kahan_check(&u, &v, 1.0, 0.0), Err(Error::InvalidGap(_))));
    }

    #[test]
    fn davis_kahan_holds_for_psd_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let m = random_psd(6, 6, &mut rng).scaled(rng.random_range(1.0..5.0));
            let m = &m - &random_psd(6, 6, &mut rng);
            let e = random_psd(6, 2, &mut rng).scaled(rng.random_range(0.0..0.5));
            let base = top_eigenspace(&m, 2).unwrap();
            let pert = top_eigenspace(&(&m - &e), 2).unwrap();
            if base.degenerate {
                continue;
            }
            let dk = davis_kahan_check(&pert.frame, &base.frame, e.spectral_norm(), base.gap).unwrap();
            assert!(dk.holds, "angle {} bound {}", dk.angle, dk.bound);
        }
    }

    #[test]
    fn regularization_isotropic_and_gap_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let x = gaussian(12, 4, &mut rng);
        let bits: Vec<u8> = (0..12).flat_map(|i| [u8::from(i % 2 == 0), u8::from(i % 3 == 0), 1]).collect();
        let y = crate::scatter::LabelMatrix::new(12, 3, bits).unwrap();
        let ds = crate::scatter::Dataset::new(x, y).unwrap();
        let ss = crate::scatter::build_scatter(&ds).unwrap();
        let rows = regularization_report(&ss, &[0.0, 0.01, 0.1, 1.0, 10.0], 2).unwrap();
        let g0 = rows[0].gap_td;
        let scale = td_matrix(&ss.sb, &ss.st_ml).spectral_norm().max(1.0);
        for w in rows.windows(2) {
            assert!(w[1].kappa_sw_gamma.value() < w[0].kappa_sw_gamma.value());
        }
        for row in &rows {
            assert!((row.gap_td - g0).abs() <= 1e-10 * scale);
            assert_eq!(row.rank_sb, numeric_rank(ss.sb.matrix(), RankTol::Default).unwrap());
        }
        assert_eq!(condition_number(&SymMatrix::identity(4).shifted(3.0)), Kappa::Finite(1.0));
        assert_eq!(condition_number(&SymMatrix::from_diagonal(&[1.0, 0.0]).unwrap()), Kappa::Infinite);
    }

    #[test]
    fn ordering_consistency_isotropic() {
        // S_t = cI makes both scalings share their ordering.
        let sb = SymMatrix::from_diagonal(&[3.0, 1.0, 2.0]).unwrap();
        let sw = &SymMatrix::identity(3).scaled(4.0) - &sb;
        let res = trace_ratio_stiefel(&sb, &sw, 1, TraceRatioOptions::default()).unwrap();
        let chk = ordering_consistency(&sb, &sw, res.lambda_star, 1).unwrap();
        assert!(chk.consistent);
        let _ = DVector::<f64>::zeros(1);
    }
}

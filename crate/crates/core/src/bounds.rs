//! Pairwise distance bounds for a fixed projection `W`.
//!
//! For two samples with label vectors `y_i, y_j` and `δ = y_i − y_j`, the
//! expected projected squared distance is `‖WᵀAδ‖² + C_w` with
//! `C_w = 2 tr(WᵀΣ_wW)`. Everything here is a function of `W`, the effect
//! matrices and the noise covariance; nothing is sampled.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::population::PopulationScatters;
use crate::spectral::{numeric_rank, singular_values, RankTol, SymMatrix};
use crate::synth::pair_products;

/// Which matrix the smallest singular value of the lower bound is taken on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMin {
    /// The full `r×L` matrix `WᵀA`. Zero whenever `r < L`.
    #[default]
    Full,
    /// Only the columns of `A` on the support of `δ`.
    Support,
}

pub fn hamming(yi: &[u8], yj: &[u8]) -> usize {
    yi.iter().zip(yj).filter(|(a, b)| a != b).count()
}

/// `1 − |y_i ∩ y_j| / |y_i ∪ y_j|`, zero when both sets are empty.
pub fn jaccard(yi: &[u8], yj: &[u8]) -> f64 {
    let inter = yi.iter().zip(yj).filter(|(&a, &b)| a == 1 && b == 1).count();
    let union = yi.iter().zip(yj).filter(|(&a, &b)| a == 1 || b == 1).count();
    if union == 0 {
        0.0
    } else {
        1.0 - inter as f64 / union as f64
    }
}

fn delta(yi: &[u8], yj: &[u8]) -> DVector<f64> {
    DVector::from_iterator(yi.len(), yi.iter().zip(yj).map(|(&a, &b)| f64::from(a) - f64::from(b)))
}

fn check_pair(yi: &[u8], yj: &[u8], l: usize) -> Result<()> {
    if yi.len() != l || yj.len() != l {
        return invalid(format!(
            "label vectors of length {} and {} for {l} labels",
            yi.len(),
            yj.len()
        ));
    }
    if yi.iter().chain(yj).any(|&b| b > 1) {
        return invalid("label vectors must be binary");
    }
    Ok(())
}

fn check_projection(w: &DMatrix<f64>, a: &DMatrix<f64>, sigma_w: &SymMatrix) -> Result<()> {
    let (d, r) = w.shape();
    if r == 0 || a.nrows() != d || sigma_w.dim() != d {
        return invalid(format!(
            "projection {d}x{r}, effects {}x{}, noise covariance {}",
            a.nrows(),
            a.ncols(),
            sigma_w.dim()
        ));
    }
    let rank = numeric_rank(w, RankTol::Default)?;
    if rank < r {
        return Err(Error::RankDeficient { rank, expected: r });
    }
    Ok(())
}

/// Smallest value of `‖Mu‖` over unit `u`: zero for wide `M`.
fn sigma_min_of(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 || m.nrows() < m.ncols() {
        return 0.0;
    }
    let s = singular_values(m);
    s[s.len() - 1]
}

fn sigma_max_of(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m)[0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceBudget {
    pub signal: f64,
    pub c_w: f64,
    pub total_expected: f64,
    pub d_h: usize,
    pub d_j: f64,
    pub k_i: usize,
    pub k_j: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn distance_budget(
    w: &DMatrix<f64>,
    a: &DMatrix<f64>,
    yi: &[u8],
    yj: &[u8],
    sigma_w: &SymMatrix,
) -> Result<DistanceBudget> {
    distance_budget_with(w, a, yi, yj, sigma_w, SigmaMin::Full)
}

pub fn distance_budget_with(
    w: &DMatrix<f64>,
    a: &DMatrix<f64>,
    yi: &[u8],
    yj: &[u8],
    sigma_w: &SymMatrix,
    mode: SigmaMin,
) -> Result<DistanceBudget> {
    check_projection(w, a, sigma_w)?;
    check_pair(yi, yj, a.ncols())?;
    let wa = w.transpose() * a;
    let s = &wa * delta(yi, yj);
    let signal = s.norm_squared();
    let c_w = 2.0 * sigma_w.compress(w)?.trace();
    let d_h = hamming(yi, yj);
    let sigma_min = match mode {
        SigmaMin::Full => sigma_min_of(&wa),
        SigmaMin::Support => {
            let cols: Vec<usize> = (0..yi.len()).filter(|&c| yi[c] != yj[c]).collect();
            sigma_min_of(&wa.select_columns(&cols))
        }
    };
    let sigma_max = sigma_max_of(&wa);
    let count = |y: &[u8]| y.iter().filter(|&&b| b == 1).count();
    Ok(DistanceBudget {
        signal,
        c_w,
        total_expected: signal + c_w,
        d_h,
        d_j: jaccard(yi, yj),
        k_i: count(yi),
        k_j: count(yj),
        sigma_min,
        sigma_max,
        lower: sigma_min * sigma_min * d_h as f64 + c_w,
        upper: sigma_max * sigma_max * d_h as f64 + c_w,
    })
}

/// `2rλ_min(Σ_w) ≤ C_w ≤ 2rλ_max(Σ_w)` for any Stiefel `W`.
pub fn noise_range(r: usize, sigma_w: &SymMatrix) -> (f64, f64) {
    let eig = sigma_w.eig();
    let r = r as f64;
    (2.0 * r * eig.lambda_min(), 2.0 * r * eig.lambda_max())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Snr {
    pub value: f64,
    /// `σ_min² d_H / (2rλ_max(Σ_w))`.
    pub lower: f64,
    /// `σ_max² d_H / (2rλ_min(Σ_w))`; infinite for singular `Σ_w`.
    pub upper: f64,
}

pub fn snr(budget: &DistanceBudget, r: usize, sigma_w: &SymMatrix) -> Result<Snr> {
    if !(budget.c_w > 0.0) {
        return Err(Error::DegenerateNoise);
    }
    if r == 0 {
        return invalid("projection rank must be positive");
    }
    let (lo, hi) = noise_range(r, sigma_w);
    let d_h = budget.d_h as f64;
    let upper_num = budget.sigma_max.powi(2) * d_h;
    Ok(Snr {
        value: budget.signal / budget.c_w,
        lower: budget.sigma_min.powi(2) * d_h / hi,
        upper: if lo > 0.0 { upper_num / lo } else if upper_num == 0.0 { 0.0 } else { f64::INFINITY },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JaccardBound {
    pub d_j: f64,
    /// `k_i + k_j − y_iᵀy_j`, the size of the union.
    pub exact_factor: f64,
    /// `max(k_i, k_j)`.
    pub weakened_factor: f64,
    /// `σ_min² · exact_factor · d_J`.
    pub exact: f64,
    /// `σ_min² · weakened_factor · d_J`.
    pub weakened: f64,
}

/// Label-signal lower bounds in terms of the Jaccard distance.
pub fn jaccard_lower(budget: &DistanceBudget, yi: &[u8], yj: &[u8]) -> Result<JaccardBound> {
    let count = |y: &[u8]| y.iter().filter(|&&b| b == 1).count();
    let (ki, kj) = (count(yi), count(yj));
    if ki == 0 || kj == 0 {
        return invalid("Jaccard bound needs non-empty label sets");
    }
    let inter = yi.iter().zip(yj).filter(|(&a, &b)| a == 1 && b == 1).count();
    let exact_factor = (ki + kj - inter) as f64;
    let weakened_factor = ki.max(kj) as f64;
    let s2 = budget.sigma_min * budget.sigma_min;
    Ok(JaccardBound {
        d_j: budget.d_j,
        exact_factor,
        weakened_factor,
        exact: s2 * exact_factor * budget.d_j,
        weakened: s2 * weakened_factor * budget.d_j,
    })
}

/// Terms of `‖Wᵀ(Aδ + e)‖²` for one noise difference `e = ε_i − ε_j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub signal: f64,
    /// `2 sᵀWᵀe`.
    pub cross: f64,
    /// `‖Wᵀe‖²`.
    pub quadratic: f64,
    pub total: f64,
}

pub fn decompose(w: &DMatrix<f64>, a: &DMatrix<f64>, yi: &[u8], yj: &[u8], noise_diff: &DVector<f64>) -> Result<Decomposition> {
    check_pair(yi, yj, a.ncols())?;
    if w.nrows() != a.nrows() || noise_diff.len() != a.nrows() {
        return invalid("dimension mismatch in distance decomposition");
    }
    let wt = w.transpose();
    let s = &wt * a * delta(yi, yj);
    let we = &wt * noise_diff;
    let total = (&s + &we).norm_squared();
    Ok(Decomposition {
        signal: s.norm_squared(),
        cross: 2.0 * s.dot(&we),
        quadratic: we.norm_squared(),
        total,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TailParams {
    #[serde(skip)]
    pub psi: SymMatrix,
    pub psi_norm2: f64,
    pub psi_fro2: f64,
    pub signal: f64,
    pub v: f64,
    pub b_tail: f64,
}

impl TailParams {
    /// Variance of the linear part `2sᵀWᵀ(ε_i − ε_j)`: `8 sᵀΨs`.
    pub fn linear_variance(s: &DVector<f64>, psi: &SymMatrix) -> f64 {
        8.0 * s.dot(&(psi.matrix() * s))
    }
}

pub fn tail_params(w: &DMatrix<f64>, a: &DMatrix<f64>, yi: &[u8], yj: &[u8], sigma_w: &SymMatrix) -> Result<TailParams> {
    check_projection(w, a, sigma_w)?;
    check_pair(yi, yj, a.ncols())?;
    let psi = sigma_w.compress(w)?;
    let signal = (w.transpose() * a * delta(yi, yj)).norm_squared();
    let psi_norm2 = psi.spectral_norm();
    let psi_fro2 = psi.frobenius_norm().powi(2);
    Ok(TailParams {
        v: (16.0 * signal * psi_norm2 + 32.0 * psi_fro2).sqrt(),
        b_tail: 4.0 * psi_norm2,
        psi,
        psi_norm2,
        psi_fro2,
        signal,
    })
}

/// Identity check for a projection orthogonal in the population total scatter.
#[derive(Debug, Clone, Serialize)]
pub struct StmlTail {
    pub params: TailParams,
    /// `‖Ψ − (I − WᵀS_b^pop W)/K^pop‖_F`.
    pub identity_residual: f64,
    /// Eigenvalues of `WᵀS_b^pop W`, descending.
    pub theta: Vec<f64>,
    pub theta_in_range: bool,
}

pub fn tail_params_stml(
    w: &DMatrix<f64>,
    a: &DMatrix<f64>,
    yi: &[u8],
    yj: &[u8],
    sigma_w: &SymMatrix,
    pop: &PopulationScatters,
) -> Result<StmlTail> {
    let params = tail_params(w, a, yi, yj, sigma_w)?;
    let r = w.ncols();
    let eye = DMatrix::<f64>::identity(r, r);
    let constraint = (pop.st_ml_pop.compress(w)?.matrix() - &eye).norm();
    if constraint > 1e-8 {
        return invalid(format!("projection is not population-total-scatter orthogonal (residual {constraint:e})"));
    }
    let sb = pop.sb_pop.compress(w)?;
    let expected = (&eye - sb.matrix()) / pop.k_pop;
    let identity_residual = (params.psi.matrix() - expected).norm();
    if identity_residual > 1e-8 * params.psi.frobenius_norm().max(1.0) {
        return Err(Error::Inconsistent(format!(
            "projected noise deviates from its scatter identity by {identity_residual:e}"
        )));
    }
    let theta: Vec<f64> = sb.eig().values.iter().copied().collect();
    let theta_in_range = theta.iter().all(|&t| (-1e-12..1.0).contains(&t));
    Ok(StmlTail {
        params,
        identity_residual,
        theta,
        theta_in_range,
    })
}

/// Half-width `V√(log(2/δ)/c) + B log(2/δ)/c`.
pub fn concentration_interval(params: &TailParams, delta_prob: f64, c_scale: f64) -> Result<f64> {
    if !(delta_prob > 0.0 && delta_prob < 1.0) {
        return invalid(format!("failure probability must lie in (0, 1), got {delta_prob}"));
    }
    if !(c_scale > 0.0) || !c_scale.is_finite() {
        return invalid(format!("constant scale must be positive, got {c_scale}"));
    }
    let t = (2.0 / delta_prob).ln() / c_scale;
    Ok(params.v * t.sqrt() + params.b_tail * t)
}

/// Constraint declared on `W`, enabling the matching tightening.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    General,
    Stiefel,
    /// `WᵀS_t^{ML,pop}W = I`.
    Stml { lambda_min_st_pop: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InteractionBound {
    /// `|E_ext − E_lin| = |2sᵀq + ‖q‖²|`, the exact shift of the expected distance.
    pub naive_gap_bound: f64,
    pub corrected_bound: f64,
    pub z_norm: f64,
    pub z_norm_bound: f64,
    /// Bound with `σ_max(A)`, `σ_max(B)` in place of the projected values.
    pub stiefel_bound: Option<f64>,
    /// Stiefel-form bound divided by `λ_min(S_t^{ML,pop})`.
    pub stml_bound: Option<f64>,
    /// `E_ext − C_w = ‖s + q‖²`.
    pub ext_signal: f64,
    /// `E_lin − C_w = ‖s‖²`.
    pub lin_signal: f64,
}

pub fn interaction_bound(
    w: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b_inter: &DMatrix<f64>,
    yi: &[u8],
    yj: &[u8],
    constraint: Constraint,
) -> Result<InteractionBound> {
    let l = a.ncols();
    check_pair(yi, yj, l)?;
    let pairs = l * l.saturating_sub(1) / 2;
    if w.nrows() != a.nrows() || b_inter.nrows() != a.nrows() || b_inter.ncols() != pairs {
        return invalid(format!(
            "interaction matrix {}x{} for {l} labels in dimension {}",
            b_inter.nrows(),
            b_inter.ncols(),
            a.nrows()
        ));
    }
    let zd = DVector::from_iterator(
        pairs,
        pair_products(yi).iter().zip(pair_products(yj)).map(|(&p, q)| f64::from(p) - f64::from(q)),
    );
    let z_norm = zd.norm();
    let d_h = hamming(yi, yj);
    let k_max = yi.iter().filter(|&&b| b == 1).count().max(yj.iter().filter(|&&b| b == 1).count());
    let z_norm_bound = ((d_h * k_max.saturating_sub(1).min(l.saturating_sub(1))) as f64).sqrt();
    if z_norm > z_norm_bound * (1.0 + 1e-12) {
        return Err(Error::Inconsistent(format!(
            "interaction difference norm {z_norm} exceeds {z_norm_bound}"
        )));
    }

    let wt = w.transpose();
    let wa = &wt * a;
    let wb = &wt * b_inter;
    let s = &wa * delta(yi, yj);
    let q = &wb * &zd;
    let dn = (d_h as f64).sqrt();
    let form = |sa: f64, sb: f64| 2.0 * sa * dn * sb * z_norm + sb * sb * z_norm * z_norm;
    let corrected_bound = form(sigma_max_of(&wa), sigma_max_of(&wb));
    let plain = || form(sigma_max_of(a), sigma_max_of(b_inter));
    let (stiefel_bound, stml_bound) = match constraint {
        Constraint::General => (None, None),
        Constraint::Stiefel => (Some(plain()), None),
        Constraint::Stml { lambda_min_st_pop } => {
            if !(lambda_min_st_pop > 0.0) {
                return invalid("population total scatter must be positive definite");
            }
            (None, Some(plain() / lambda_min_st_pop))
        }
    };
    let lin_signal = s.norm_squared();
    let ext_signal = (&s + &q).norm_squared();
    Ok(InteractionBound {
        naive_gap_bound: (ext_signal - lin_signal).abs(),
        corrected_bound,
        z_norm,
        z_norm_bound,
        stiefel_bound,
        stml_bound,
        ext_signal,
        lin_signal,
    })
}

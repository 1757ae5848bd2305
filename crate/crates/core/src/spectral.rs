//! Dense symmetric linear algebra: eigendecomposition with a deterministic
//! sign convention, numeric rank, orthonormal frames and principal angles.
//!
//! The factorizations themselves come from `nalgebra`; this module fixes the
//! ordering, sign and tolerance conventions every other module relies on.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Maximum Frobenius deviation of `QᵀQ` from the identity for a [`Frame`].
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Entries whose magnitude is within this relative distance of the largest
/// one are treated as tied when fixing eigenvector signs.
const SIGN_TIE_TOL: f64 = 1e-12;

/// Real symmetric matrix. The stored entries are exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    /// Symmetrizes `m` as `(m + mᵀ)/2`. Rejects empty, non-square or
    /// non-finite input.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 || m.nrows() != m.ncols() {
            return invalid(format!(
                "symmetric matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            ));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return invalid("matrix has non-finite entries");
        }
        Ok(Self::symmetrized(m))
    }

    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let d = m.nrows();
        let mut out = m;
        for i in 0..d {
            for j in (i + 1)..d {
                let v = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        Self { inner: out }
    }

    pub fn zeros(d: usize) -> Self {
        Self { inner: DMatrix::zeros(d, d) }
    }

    pub fn identity(d: usize) -> Self {
        Self { inner: DMatrix::identity(d, d) }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// `Σ_i v_i v_iᵀ` style constructions: `m mᵀ` for any real `m`.
    pub fn gram_of_rows(m: &DMatrix<f64>) -> Self {
        Self::symmetrized(m * m.transpose())
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        let eig = self.eig();
        eig.values
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// `S + γI`.
    pub fn shifted(&self, gamma: f64) -> Self {
        let mut m = self.inner.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += gamma;
        }
        Self { inner: m }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { inner: &self.inner * c }
    }

    /// Compression `WᵀSW`.
    pub fn compress(&self, w: &DMatrix<f64>) -> Result<SymMatrix> {
        if w.nrows() != self.dim() {
            return invalid(format!(
                "cannot compress {}x{} matrix with {} rows",
                self.dim(),
                self.dim(),
                w.nrows()
            ));
        }
        Ok(Self::symmetrized(w.transpose() * &self.inner * w))
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    pub fn eig(&self) -> EigenPair {
        eig_sorted(&self.inner)
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix { inner: &self.inner + &rhs.inner }
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix { inner: &self.inner - &rhs.inner }
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        self.scaled(rhs)
    }
}

/// Eigenvalues sorted descending with aligned, sign-normalized eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenPair {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn lambda_max(&self) -> f64 {
        self.values[0]
    }

    pub fn lambda_min(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Frame spanned by the leading `r` eigenvectors.
    pub fn top_frame(&self, r: usize) -> Result<Frame> {
        if r == 0 || r > self.dim() {
            return invalid(format!("rank {r} outside 1..={}", self.dim()));
        }
        Ok(Frame {
            columns: self.vectors.columns(0, r).into_owned(),
        })
    }

    /// `λ_r − λ_{r+1}` (1-based `r`), requires `1 ≤ r < d`.
    pub fn gap(&self, r: usize) -> Result<f64> {
        if r == 0 || r >= self.dim() {
            return invalid(format!("gap index {r} outside 1..{}", self.dim()));
        }
        Ok(self.values[r - 1] - self.values[r])
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.vectors * DMatrix::from_diagonal(&self.values) * self.vectors.transpose()
    }
}

/// Symmetric eigendecomposition.
///
/// Eigenvalues are sorted descending (stable with respect to the solver's
/// order on exact ties). Each eigenvector is signed so that its
/// largest-magnitude entry is positive; ties go to the lowest index.
pub fn sym_eig(s: &SymMatrix) -> Result<EigenPair> {
    if s.inner.iter().any(|v| !v.is_finite()) {
        return invalid("matrix has non-finite entries");
    }
    Ok(eig_sorted(&s.inner))
}

fn eig_sorted(m: &DMatrix<f64>) -> EigenPair {
    let d = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let values = DVector::from_iterator(d, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        fix_sign(&mut col);
        vectors.set_column(dst, &col);
    }
    EigenPair { values, vectors }
}

fn fix_sign(v: &mut DVector<f64>) {
    let max = v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|x| x.abs() >= max * (1.0 - SIGN_TIE_TOL))
        .unwrap_or(0);
    if v[pivot] < 0.0 {
        v.neg_mut();
    }
}

/// Singular-value threshold used by [`numeric_rank`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankTol {
    /// `max(rows, cols) · ε · σ_max`.
    #[default]
    Default,
    /// `factor · σ_max`.
    Relative(f64),
    /// Fixed threshold.
    Absolute(f64),
}

impl RankTol {
    pub fn threshold(&self, rows: usize, cols: usize, sigma_max: f64) -> f64 {
        match *self {
            RankTol::Default => rows.max(cols) as f64 * f64::EPSILON * sigma_max,
            RankTol::Relative(f) => f * sigma_max,
            RankTol::Absolute(t) => t,
        }
    }
}

/// Singular values sorted descending (`min(rows, cols)` of them).
pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    DVector::from_vec(sv)
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).iter().copied().next().unwrap_or(0.0)
}

/// Number of singular values strictly above the tolerance.
pub fn numeric_rank(m: &DMatrix<f64>, tol: RankTol) -> Result<usize> {
    numeric_rank_scaled(m, tol, 0.0)
}

/// As [`numeric_rank`], measuring the tolerance against `max(σ_max, scale)`.
///
/// A matrix computed as a product of factors should pass the product of
/// their norms, so that a product that vanishes in exact arithmetic is not
/// judged against its own rounding noise.
pub fn numeric_rank_scaled(m: &DMatrix<f64>, tol: RankTol, scale: f64) -> Result<usize> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return invalid("numeric rank of an empty matrix");
    }
    if m.iter().any(|v| !v.is_finite()) {
        return invalid("matrix has non-finite entries");
    }
    let sv = singular_values(m);
    let threshold = tol.threshold(m.nrows(), m.ncols(), sv[0].max(scale));
    Ok(sv.iter().filter(|&&s| s > threshold).count())
}

/// Orthonormal `d×r` frame, a point on the Stiefel manifold `St(d, r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    columns: DMatrix<f64>,
}

impl Frame {
    /// Wraps an already-orthonormal matrix, checking `‖QᵀQ − I‖_F ≤ 1e-10`.
    pub fn new(columns: DMatrix<f64>) -> Result<Self> {
        let (d, r) = columns.shape();
        if r == 0 || d == 0 || r > d {
            return invalid(format!("frame shape {d}x{r} is not a Stiefel point"));
        }
        let frame = Self { columns };
        let residual = frame.orthonormality_residual();
        if residual.is_nan() || residual > ORTHONORMAL_TOL {
            return invalid(format!("columns are not orthonormal (residual {residual:e})"));
        }
        Ok(frame)
    }

    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn rank(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn into_columns(self) -> DMatrix<f64> {
        self.columns
    }

    pub fn orthonormality_residual(&self) -> f64 {
        let r = self.rank();
        (self.columns.transpose() * &self.columns - DMatrix::<f64>::identity(r, r)).norm()
    }

    /// Orthogonal projector `QQᵀ`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.columns * self.columns.transpose()
    }
}

/// Orthonormal basis of the column span of a full-column-rank matrix
/// (modified Gram–Schmidt with one re-orthogonalization pass).
pub fn orthonormalize(w: &DMatrix<f64>) -> Result<Frame> {
    let (d, r) = w.shape();
    if r == 0 {
        return invalid("cannot orthonormalize a matrix with no columns");
    }
    if r > d {
        return Err(Error::RankDeficient { rank: d, expected: r });
    }
    let rank = numeric_rank(w, RankTol::Default)?;
    if rank < r {
        return Err(Error::RankDeficient { rank, expected: r });
    }
    let mut q = w.clone();
    for j in 0..r {
        let mut v = q.column(j).into_owned();
        for _pass in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let proj = qi.dot(&v);
                v.axpy(-proj, &qi, 1.0);
            }
        }
        let norm = v.norm();
        if norm <= f64::EPSILON * w.column(j).norm().max(f64::MIN_POSITIVE) {
            return Err(Error::RankDeficient { rank: j, expected: r });
        }
        q.set_column(j, &(v / norm));
    }
    Frame::new(q)
}

/// `sin∠(U, V) = ‖sin Θ‖₂`, the sine of the largest principal angle.
///
/// Evaluated as `‖(I − UUᵀ)V‖₂`, which equals `sqrt(1 − σ_min(UᵀV)²)` but
/// keeps full relative accuracy for nearly coincident subspaces.
pub fn principal_angle_sin(u: &Frame, v: &Frame) -> Result<f64> {
    if u.ambient_dim() != v.ambient_dim() || u.rank() != v.rank() {
        return invalid(format!(
            "frames {}x{} and {}x{} are not comparable",
            u.ambient_dim(),
            u.rank(),
            v.ambient_dim(),
            v.rank()
        ));
    }
    let residual = v.columns() - u.columns() * (u.columns().transpose() * v.columns());
    Ok(spectral_norm(&residual).clamp(0.0, 1.0))
}

/// Largest principal angle in degrees.
pub fn principal_angle_deg(u: &Frame, v: &Frame) -> Result<f64> {
    Ok(principal_angle_sin(u, v)?.asin().to_degrees())
}

/// `S^{-1/2}` for a positive definite `S`. Fails with
/// [`Error::SingularTotalScatter`] when `λ_min ≤ floor_rel · λ_max`.
pub fn inv_sqrt_pd(s: &SymMatrix, floor_rel: f64) -> Result<DMatrix<f64>> {
    let eig = s.eig();
    let floor = floor_rel * eig.lambda_max().abs();
    if eig.lambda_min() <= floor {
        return Err(Error::SingularTotalScatter {
            min_eigenvalue: eig.lambda_min(),
            floor,
        });
    }
    let inv_sqrt = eig.values.map(|v| 1.0 / v.sqrt());
    Ok(&eig.vectors * DMatrix::from_diagonal(&inv_sqrt) * eig.vectors.transpose())
}

/// Cholesky factor `L` with `S = LLᵀ`, or `None` when `S` is not positive definite.
pub fn cholesky_lower(s: &SymMatrix) -> Option<DMatrix<f64>> {
    s.matrix().clone().cholesky().map(|c| c.l())
}

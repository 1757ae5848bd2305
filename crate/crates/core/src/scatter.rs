//! Empirical multilabel scatter matrices and the rank analysis of the
//! between-class scatter.
//!
//! A sample carrying `k_i` labels contributes once to each of its label
//! classes, so the multilabel total scatter `S_t^ML = S_b^ML + S_w^ML` weights
//! sample `i` by `k_i`. The residual `R = S_t^ML − S_t` collects the excess.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::spectral::{numeric_rank, numeric_rank_scaled, spectral_norm, RankTol, SymMatrix};

/// Relative tolerance for the internal two-way cross-checks.
const CROSS_CHECK_TOL: f64 = 1e-8;

/// Binary `n×L` label assignment with cached statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    n: usize,
    l: usize,
    bits: Vec<u8>,
    counts: Vec<usize>,
    cardinalities: Vec<usize>,
    total: usize,
    gram: DMatrix<f64>,
    one_in_colspace: bool,
}

impl LabelMatrix {
    /// Builds from row-major 0/1 entries.
    pub fn new(n: usize, l: usize, bits: Vec<u8>) -> Result<Self> {
        if n == 0 || l == 0 {
            return invalid(format!("label matrix must be non-empty, got {n}x{l}"));
        }
        if bits.len() != n * l {
            return invalid(format!("expected {} label entries, got {}", n * l, bits.len()));
        }
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return invalid(format!("label entry {pos} is {} (must be 0 or 1)", bits[pos]));
        }
        let mut counts = vec![0usize; l];
        let mut cardinalities = vec![0usize; n];
        for i in 0..n {
            for j in 0..l {
                if bits[i * l + j] == 1 {
                    counts[j] += 1;
                    cardinalities[i] += 1;
                }
            }
        }
        if let Some(label) = counts.iter().position(|&c| c == 0) {
            return Err(Error::MissingLabel { label });
        }
        if let Some(sample) = cardinalities.iter().position(|&k| k == 0) {
            return Err(Error::UnlabeledSample { sample });
        }
        let total = cardinalities.iter().sum();

        let y = DMatrix::from_fn(n, l, |i, j| f64::from(bits[i * l + j]));
        let gram = y.transpose() * &y;
        let augmented = DMatrix::from_fn(n, l + 1, |i, j| if j < l { y[(i, j)] } else { 1.0 });
        let one_in_colspace =
            numeric_rank(&augmented, RankTol::Default)? == numeric_rank(&y, RankTol::Default)?;

        Ok(Self {
            n,
            l,
            bits,
            counts,
            cardinalities,
            total,
            gram,
            one_in_colspace,
        })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let l = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != l) {
            return invalid("label rows have unequal lengths");
        }
        Self::new(rows.len(), l, rows.concat())
    }

    /// Parses rows written as bit strings, e.g. `["110", "011"]`.
    pub fn from_bit_strings(rows: &[&str]) -> Result<Self> {
        let parsed: Vec<Vec<u8>> = rows
            .iter()
            .map(|r| {
                r.chars()
                    .map(|c| match c {
                        '0' => Ok(0),
                        '1' => Ok(1),
                        other => Err(Error::InvalidInput(format!("bad label character {other:?}"))),
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        Self::from_rows(&parsed)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_labels(&self) -> usize {
        self.l
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.l + j] == 1
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.bits[i * self.l..(i + 1) * self.l]
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Per-label sample counts `n_ℓ`.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Per-sample cardinalities `k_i`.
    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    /// `K = Σ k_i`.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn k_max(&self) -> usize {
        self.cardinalities.iter().copied().max().unwrap_or(0)
    }

    /// Co-occurrence `Γ = YᵀY`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Whether `1_n ∈ col(Y)`.
    pub fn one_in_colspace(&self) -> bool {
        self.one_in_colspace
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.l, |i, j| f64::from(self.bits[i * self.l + j]))
    }

    /// The first `m` rows. Fails if a label disappears.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.n {
            return invalid(format!("prefix length {m} outside 1..={}", self.n));
        }
        Self::new(m, self.l, self.bits[..m * self.l].to_vec())
    }
}

/// Features together with their labels and the derived means.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: DMatrix<f64>,
    labels: LabelMatrix,
    mu: DVector<f64>,
    class_means: DMatrix<f64>,
    centered: DMatrix<f64>,
}

impl Dataset {
    /// `x` is `n×d`, one sample per row.
    pub fn new(x: DMatrix<f64>, labels: LabelMatrix) -> Result<Self> {
        let (n, d) = x.shape();
        if d == 0 {
            return invalid("features must have at least one column");
        }
        if n != labels.n() {
            return invalid(format!("{n} feature rows but {} label rows", labels.n()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return invalid("features contain non-finite values");
        }
        let l = labels.num_labels();
        let mut mu = DVector::zeros(d);
        let mut class_means = DMatrix::zeros(l, d);
        for c in 0..d {
            let col = x.column(c);
            mu[c] = compensated_sum(col.iter().copied()) / n as f64;
            for j in 0..l {
                let s = compensated_sum((0..n).filter(|&i| labels.get(i, j)).map(|i| col[i]));
                class_means[(j, c)] = s / labels.counts()[j] as f64;
            }
        }
        let mut centered = x.clone();
        for mut row in centered.row_iter_mut() {
            row -= mu.transpose();
        }
        Ok(Self {
            x,
            labels,
            mu,
            class_means,
            centered,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn labels(&self) -> &LabelMatrix {
        &self.labels
    }

    /// Global mean `μ`.
    pub fn mean(&self) -> &DVector<f64> {
        &self.mu
    }

    /// `L×d`, row `ℓ` is the class mean `μ_ℓ`.
    pub fn class_means(&self) -> &DMatrix<f64> {
        &self.class_means
    }

    /// `X̃ = HX`.
    pub fn centered(&self) -> &DMatrix<f64> {
        &self.centered
    }

    /// Writes features and labels as two headed CSV files.
    pub fn write_csv(&self, features: &Path, labels: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(features)?;
        w.write_record((0..self.dim()).map(|j| format!("f{j}")))?;
        for row in self.x.row_iter() {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(labels)?;
        w.write_record((0..self.labels.num_labels()).map(|j| format!("y{j}")))?;
        for i in 0..self.n() {
            w.write_record(self.labels.row(i).iter().map(|b| b.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(features: &Path, labels: &Path) -> Result<Self> {
        let (fx, d) = read_table(features, |s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("feature {s:?}: {e}")))
        })?;
        let (fy, l) = read_table(labels, |s| match s.trim() {
            "0" => Ok(0u8),
            "1" => Ok(1u8),
            other => Err(Error::InvalidInput(format!("label entry {other:?} is not 0/1"))),
        })?;
        let n = fx.len() / d.max(1);
        let labels = LabelMatrix::new(fy.len() / l.max(1), l, fy)?;
        Dataset::new(DMatrix::from_row_slice(n, d, &fx), labels)
    }
}

fn read_table<T>(path: &Path, parse: impl Fn(&str) -> Result<T>) -> Result<(Vec<T>, usize)> {
    let mut r = csv::Reader::from_path(path)?;
    let width = r.headers()?.len();
    if width == 0 {
        return invalid(format!("{} has no columns", path.display()));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return invalid(format!(
                "{} row {} has {} columns, header has {width}",
                path.display(),
                line + 1,
                rec.len()
            ));
        }
        for field in rec.iter() {
            out.push(parse(field)?);
        }
    }
    Ok((out, width))
}

/// Neumaier summation.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// The empirical scatter matrices of one dataset.
#[derive(Debug, Clone)]
pub struct ScatterSet {
    /// Multilabel between-class scatter `S_b^ML`.
    pub sb: SymMatrix,
    /// Multilabel within-class scatter `S_w^ML`.
    pub sw: SymMatrix,
    /// Cardinality-weighted total scatter `Σ k_i x̃_i x̃_iᵀ`.
    pub st_ml: SymMatrix,
    /// Ordinary total scatter `X̃ᵀX̃`.
    pub st: SymMatrix,
    /// `R = Σ (k_i − 1) x̃_i x̃_iᵀ`.
    pub r: SymMatrix,
    /// Factor `M = X̃ᵀ Y D_n^{-1/2}` with `S_b^ML = MMᵀ`.
    pub m: DMatrix<f64>,
}

pub fn build_scatter(ds: &Dataset) -> Result<ScatterSet> {
    let labels = ds.labels();
    let (n, d) = (ds.n(), ds.dim());
    let l = labels.num_labels();
    let xc = ds.centered();

    // S_b from its definition as a sum over labels.
    let mut dev = DMatrix::zeros(d, l);
    for j in 0..l {
        let w = (labels.counts()[j] as f64).sqrt();
        for c in 0..d {
            dev[(c, j)] = w * (ds.class_means()[(j, c)] - ds.mu[c]);
        }
    }
    let sb = SymMatrix::gram_of_rows(&dev);

    // Factor through X̃ᵀY.
    let xty = xc.transpose() * labels.to_matrix();
    let mut m = xty;
    for j in 0..l {
        let s = 1.0 / (labels.counts()[j] as f64).sqrt();
        m.column_mut(j).scale_mut(s);
    }

    // S_w from stacked within-class residuals.
    let mut resid = DMatrix::zeros(d, labels.total());
    let mut col = 0;
    for i in 0..n {
        for j in 0..l {
            if labels.get(i, j) {
                for c in 0..d {
                    resid[(c, col)] = ds.x[(i, c)] - ds.class_means()[(j, c)];
                }
                col += 1;
            }
        }
    }
    let sw = SymMatrix::gram_of_rows(&resid);

    let weighted = |w: &dyn Fn(usize) -> f64| {
        let mut scaled = xc.transpose();
        for i in 0..n {
            scaled.column_mut(i).scale_mut(w(i).sqrt());
        }
        SymMatrix::gram_of_rows(&scaled)
    };
    let k = labels.cardinalities();
    let st_ml = weighted(&|i| k[i] as f64);
    let st = SymMatrix::gram_of_rows(&xc.transpose());
    let r = weighted(&|i| (k[i] - 1) as f64);

    let sum = &sb + &sw;
    let err = (sum.matrix() - st_ml.matrix()).norm();
    if err > CROSS_CHECK_TOL * st_ml.frobenius_norm().max(f64::MIN_POSITIVE) {
        return Err(Error::Inconsistent(format!(
            "S_b + S_w differs from the weighted total scatter by {err:e}"
        )));
    }

    Ok(ScatterSet {
        sb,
        sw,
        st_ml,
        st,
        r,
        m,
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RankReport {
    pub rank_sb: usize,
    pub rank_xty: usize,
    pub rank_y: usize,
    pub rank_hy: usize,
    /// `min(d, n − 1, rank Y − [1_n ∈ col Y])`.
    pub bound: usize,
    pub one_in_colspace: bool,
    /// `rank S_b > L − 1`.
    pub excess: bool,
}

pub fn rank_analysis(ds: &Dataset, ss: &ScatterSet, tol: RankTol) -> Result<RankReport> {
    let labels = ds.labels();
    let y = labels.to_matrix();
    let xty = ds.centered().transpose() * &y;
    let mut hy = y.clone();
    for mut c in hy.column_iter_mut() {
        let mean = c.sum() / c.len() as f64;
        c.add_scalar_mut(-mean);
    }
    // Rank of S_b = MMᵀ read off the factor M; both products are judged
    // against the norms of their factors. Centering error grows with the raw
    // feature magnitude and with n, so the raw features set the scale.
    let x_norm = ds.features().norm() * (ds.n() as f64).sqrt();
    let inv_sqrt_counts = DMatrix::from_diagonal(&DVector::from_iterator(
        labels.num_labels(),
        labels.counts().iter().map(|&c| 1.0 / (c as f64).sqrt()),
    ));
    let rank_sb = numeric_rank_scaled(&ss.m, tol, x_norm * spectral_norm(&(&y * inv_sqrt_counts)))?;
    let rank_xty = numeric_rank_scaled(&xty, tol, x_norm * spectral_norm(&y))?;
    if rank_sb != rank_xty {
        return Err(Error::Inconsistent(format!(
            "rank of S_b ({rank_sb}) differs from rank of X̃ᵀY ({rank_xty})"
        )));
    }
    let rank_y = numeric_rank(&y, tol)?;
    // HY is zero when every column of Y is constant.
    let rank_hy = if hy.iter().all(|&v| v == 0.0) {
        0
    } else {
        numeric_rank(&hy, tol)?
    };
    let one = labels.one_in_colspace();
    let bound = ds
        .dim()
        .min(ds.n() - 1)
        .min(rank_y - usize::from(one));
    Ok(RankReport {
        rank_sb,
        rank_xty,
        rank_y,
        rank_hy,
        bound,
        one_in_colspace: one,
        excess: rank_sb + 1 > labels.num_labels(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ResidualBound {
    /// `‖R‖₂`.
    pub lhs: f64,
    /// `max_i (k_i − 1) · λ_max(S_t^(K))`.
    pub rhs: f64,
}

impl ResidualBound {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + 1e-8 * self.rhs
    }
}

pub fn residual_bound(ds: &Dataset, ss: &ScatterSet) -> ResidualBound {
    let k = ds.labels().cardinalities();
    let multi: Vec<usize> = (0..ds.n()).filter(|&i| k[i] > 1).collect();
    let lhs = ss.r.spectral_norm();
    if multi.is_empty() {
        return ResidualBound { lhs, rhs: 0.0 };
    }
    let rows = ds.centered().select_rows(multi.iter());
    let st_k = SymMatrix::gram_of_rows(&rows.transpose());
    let kmax = ds.labels().k_max() as f64;
    ResidualBound {
        lhs,
        rhs: (kmax - 1.0) * st_k.eig().lambda_max(),
    }
}

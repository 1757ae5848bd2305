//! Seeded generators for label matrices and label-effect model data.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::population::{label_moments, LabelDistribution, ModelParams, NoiseKind};
use crate::scatter::{Dataset, LabelMatrix};
use crate::spectral::orthonormalize;

/// How many labels each sample carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SchemeKind {
    Single,
    Uniform { k: usize },
    /// `(cardinality, fraction)` pairs; fractions sum to one.
    Variable { mix: Vec<(usize, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScheme {
    #[serde(flatten)]
    pub kind: SchemeKind,
    pub labels: usize,
}

impl LabelScheme {
    pub fn new(kind: SchemeKind, labels: usize) -> Result<Self> {
        let s = Self { kind, labels };
        s.validate()?;
        Ok(s)
    }

    pub fn single(labels: usize) -> Self {
        Self { kind: SchemeKind::Single, labels }
    }

    pub fn uniform(k: usize, labels: usize) -> Result<Self> {
        Self::new(SchemeKind::Uniform { k }, labels)
    }

    pub fn variable(mix: Vec<(usize, f64)>, labels: usize) -> Result<Self> {
        Self::new(SchemeKind::Variable { mix }, labels)
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.labels;
        if l == 0 {
            return Err(Error::InvalidScheme("scheme needs at least one label".into()));
        }
        let check_k = |k: usize| {
            if k == 0 || k > l {
                Err(Error::InvalidScheme(format!("cardinality {k} outside 1..={l}")))
            } else {
                Ok(())
            }
        };
        match &self.kind {
            SchemeKind::Single => Ok(()),
            SchemeKind::Uniform { k } => check_k(*k),
            SchemeKind::Variable { mix } => {
                if mix.is_empty() {
                    return Err(Error::InvalidScheme("empty cardinality mix".into()));
                }
                for &(k, f) in mix {
                    check_k(k)?;
                    if !f.is_finite() || f < 0.0 {
                        return Err(Error::InvalidScheme(format!("fraction {f} for k = {k}")));
                    }
                }
                let total: f64 = mix.iter().map(|&(_, f)| f).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidScheme(format!("fractions sum to {total}")));
                }
                Ok(())
            }
        }
    }

    /// `(cardinality, probability)` pairs.
    pub fn cardinality_mix(&self) -> Vec<(usize, f64)> {
        match &self.kind {
            SchemeKind::Single => vec![(1, 1.0)],
            SchemeKind::Uniform { k } => vec![(*k, 1.0)],
            SchemeKind::Variable { mix } => mix.clone(),
        }
    }

    pub fn k_max(&self) -> usize {
        self.cardinality_mix()
            .iter()
            .filter(|&&(_, f)| f > 0.0)
            .map(|&(k, _)| k)
            .max()
            .unwrap_or(1)
    }

    /// Exact pattern distribution of one row before forced presence:
    /// a cardinality from the mix, then a uniform subset of that size.
    pub fn distribution(&self) -> Result<LabelDistribution> {
        self.validate()?;
        let l = self.labels;
        let mut patterns = Vec::new();
        for (k, f) in self.cardinality_mix() {
            if f == 0.0 {
                continue;
            }
            let subsets = k_subsets(l, k);
            let w = f / subsets.len() as f64;
            for s in subsets {
                let mut p = vec![0u8; l];
                for j in s {
                    p[j] = 1;
                }
                patterns.push((p, w));
            }
        }
        let total: f64 = patterns.iter().map(|(_, w)| w).sum();
        for (_, w) in patterns.iter_mut() {
            *w /= total;
        }
        label_moments(patterns)
    }
}

fn k_subsets(l: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, l: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for j in start..l {
            cur.push(j);
            rec(j + 1, l, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, l, k, &mut Vec::new(), &mut out);
    out
}

/// Stream purposes for [`Seed::stream`].
pub mod purpose {
    pub const LABELS: u64 = 1;
    pub const EFFECTS: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const FEATURES: u64 = 4;
    pub const PAIRS: u64 = 5;
    pub const PROBES: u64 = 6;
    pub const INTERACTIONS: u64 = 7;
}

/// Base seed from which independent per-(experiment, trial, purpose)
/// generators are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seed {
    pub base: u64,
}

impl Seed {
    pub fn new(base: u64) -> Self {
        Self { base }
    }

    pub fn stream(&self, experiment: u64, trial: u64, purpose: u64) -> ChaCha8Rng {
        let mut state = self.base;
        let mut key = [0u8; 32];
        for (chunk, word) in key.chunks_mut(8).zip([experiment, trial, purpose, 0x6d6c6461]) {
            state = splitmix64(state ^ splitmix64(word));
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Draws an `n×L` label matrix. Each row gets a cardinality from the scheme
/// and a uniform subset of that size. Labels left empty are then placed by
/// swapping out a duplicated label in the lowest-index row that has one,
/// so every row keeps its cardinality.
pub fn gen_labels<R: Rng + ?Sized>(scheme: &LabelScheme, n: usize, rng: &mut R) -> Result<LabelMatrix> {
    scheme.validate()?;
    let l = scheme.labels;
    if n < l {
        return invalid(format!("need n ≥ L to place every label, got n = {n}, L = {l}"));
    }
    let mix = scheme.cardinality_mix();
    let mut bits = vec![0u8; n * l];
    for i in 0..n {
        let k = draw_cardinality(&mix, rng);
        for j in index::sample(rng, l, k).into_iter() {
            bits[i * l + j] = 1;
        }
    }

    let mut counts = vec![0usize; l];
    for i in 0..n {
        for j in 0..l {
            counts[j] += usize::from(bits[i * l + j]);
        }
    }
    for missing in 0..l {
        if counts[missing] > 0 {
            continue;
        }
        let (i, j) = (0..n)
            .find_map(|i| (0..l).find(|&j| bits[i * l + j] == 1 && counts[j] >= 2).map(|j| (i, j)))
            .ok_or_else(|| Error::Inconsistent("no duplicated label to reassign".into()))?;
        bits[i * l + j] = 0;
        bits[i * l + missing] = 1;
        counts[j] -= 1;
        counts[missing] = 1;
    }
    LabelMatrix::new(n, l, bits)
}

fn draw_cardinality<R: Rng + ?Sized>(mix: &[(usize, f64)], rng: &mut R) -> usize {
    if mix.len() == 1 {
        return mix[0].0;
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(k, f) in mix {
        acc += f;
        if u < acc {
            return k;
        }
    }
    mix.iter().rev().find(|&&(_, f)| f > 0.0).map_or(mix[0].0, |&(k, _)| k)
}

/// Pairwise products `y_ℓ y_ℓ'` for `ℓ < ℓ'` in lexicographic order.
pub fn pair_products(y: &[u8]) -> Vec<u8> {
    let l = y.len();
    let mut z = Vec::with_capacity(l * l.saturating_sub(1) / 2);
    for a in 0..l {
        for b in (a + 1)..l {
            z.push(y[a] & y[b]);
        }
    }
    z
}

/// Noiseless rows `μ + A y_i + α B z_i` as an `n×d` matrix.
pub fn signal_matrix(labels: &LabelMatrix, params: &ModelParams, alpha: f64) -> Result<DMatrix<f64>> {
    if labels.num_labels() != params.num_labels() {
        return invalid(format!(
            "labels have {} columns, model expects {}",
            labels.num_labels(),
            params.num_labels()
        ));
    }
    let (n, d) = (labels.n(), params.dim());
    let mut x = DMatrix::zeros(n, d);
    let ya = labels.to_matrix() * params.a.transpose();
    let interactions = params.b_inter.ncols() > 0;
    for i in 0..n {
        let mut row = &params.mu + ya.row(i).transpose();
        if interactions {
            let z = pair_products(labels.row(i));
            let zv = DVector::from_iterator(z.len(), z.iter().map(|&b| f64::from(b)));
            row += (&params.b_inter * zv) * alpha;
        }
        x.set_row(i, &row.transpose());
    }
    Ok(x)
}

/// `n×d` noise rows with covariance `Σ_w`.
pub fn noise_matrix<R: Rng + ?Sized>(n: usize, params: &ModelParams, rng: &mut R) -> DMatrix<f64> {
    let d = params.dim();
    let raw = match params.noise {
        NoiseKind::Gaussian => DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(rng)),
        NoiseKind::Rademacher => {
            DMatrix::from_fn(n, d, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
        }
    };
    raw * params.noise_factor().transpose()
}

/// Samples the (possibly interaction-extended) label-effect model.
pub fn gen_data<R: Rng + ?Sized>(
    labels: &LabelMatrix,
    params: &ModelParams,
    alpha: f64,
    rng: &mut R,
) -> Result<Dataset> {
    let signal = signal_matrix(labels, params, alpha)?;
    let noise = noise_matrix(labels.n(), params, rng);
    Dataset::new(signal + noise, labels.clone())
}

/// Entries i.i.d. `N(0, sd²)`.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, sd: f64, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let z: f64 = StandardNormal.sample(rng);
        sd * z
    })
}

/// `U diag(s)` with `U` a random `d×L` orthonormal frame, so the columns
/// are orthogonal and the singular values are exactly `s`.
pub fn orthogonal_effects<R: Rng + ?Sized>(d: usize, singular_values: &[f64], rng: &mut R) -> Result<DMatrix<f64>> {
    let l = singular_values.len();
    if l == 0 || l > d {
        return invalid(format!("cannot place {l} orthogonal effects in dimension {d}"));
    }
    let u = orthonormalize(&gaussian_matrix(d, l, 1.0, rng))?;
    Ok(u.columns() * DMatrix::from_diagonal(&DVector::from_column_slice(singular_values)))
}

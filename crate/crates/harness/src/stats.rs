//! Order-independent trial reductions.

use mlda_core::Error;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub median: f64,
    pub p95: f64,
    pub mean: f64,
    /// Standard error of the mean; zero for a single trial.
    pub se: f64,
}

/// Nearest-rank percentile of sorted data: the `⌈p/100 · n⌉`-th value.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Reduces `(trial index, value)` pairs after sorting by trial index, so
/// the result does not depend on completion order.
pub fn aggregate(results: &[(usize, f64)]) -> Result<Summary, Error> {
    if results.is_empty() {
        return Err(Error::InvalidInput("aggregate needs at least one trial".into()));
    }
    let mut by_trial = results.to_vec();
    by_trial.sort_by_key(|&(i, _)| i);
    let values: Vec<f64> = by_trial.iter().map(|&(_, v)| v).collect();
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let se = if n > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values;
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        count: n,
        median: nearest_rank(&sorted, 50.0),
        p95: nearest_rank(&sorted, 95.0),
        mean,
        se,
    })
}

/// Mean and standard error of a sample.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Least-squares slope of `log(error)` against `log(n)`.
pub fn slope_fit(ns: &[f64], errors: &[f64]) -> Result<f64, Error> {
    if ns.len() != errors.len() || ns.len() < 3 {
        return Err(Error::InvalidInput("slope fit needs at least three paired points".into()));
    }
    if ns.iter().chain(errors).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput("slope fit needs positive finite values".into()));
    }
    let x: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    let k = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / k, y.iter().sum::<f64>() / k);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("slope fit needs at least two distinct n".into()));
    }
    Ok(sxy / sxx)
}

/// Number of adjacent increases in a sequence expected to be non-increasing.
pub fn inversions(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] > w[0]).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_trial() {
        let s = aggregate(&[(0, 0.3)]).unwrap();
        assert_eq!((s.median, s.p95, s.mean, s.se), (0.3, 0.3, 0.3, 0.0));
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn nearest_rank_on_one_to_hundred() {
        let v: Vec<(usize, f64)> = (1..=100).map(|i| (i, i as f64)).collect();
        let s = aggregate(&v).unwrap();
        assert_eq!(s.p95, 95.0);
        assert_eq!(s.median, 50.0);
    }

    #[test]
    fn permutation_invariant() {
        let ordered: Vec<(usize, f64)> = (0..37).map(|i| (i, ((i * 7919) % 101) as f64 / 3.0)).collect();
        let mut shuffled = ordered.clone();
        shuffled.reverse();
        shuffled.swap(3, 20);
        assert_eq!(aggregate(&ordered).unwrap(), aggregate(&shuffled).unwrap());
    }

    #[test]
    fn exact_power_law() {
        let ns = [50.0, 100.0, 400.0, 2000.0];
        let e: Vec<f64> = ns.iter().map(|n: &f64| 3.0 / n.sqrt()).collect();
        assert!((slope_fit(&ns, &e).unwrap() + 0.5).abs() < 1e-10);
        assert_eq!(slope_fit(&ns, &[0.2; 4]).unwrap(), 0.0);
        assert!(slope_fit(&ns, &[0.2, 0.0, 0.1, 0.1]).is_err());
        assert!(slope_fit(&ns[..2], &e[..2]).is_err());
    }

    #[test]
    fn published_convergence_medians() {
        let ns = [50.0, 100.0, 200.0, 500.0, 1000.0, 2000.0, 5000.0, 10000.0, 20000.0];
        let med = [0.160, 0.115, 0.106, 0.072, 0.051, 0.051, 0.041, 0.033, 0.029];
        let s = slope_fit(&ns, &med).unwrap();
        assert!((-0.35..=-0.20).contains(&s), "{s}");
        assert_eq!(inversions(&med), 0);
    }
}

//! Weighted Monte Carlo statistics, reduced in a fixed order.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// `exp(l_i - max l)`; invariant under a common shift of the log-weights.
pub fn normalized_weights(log_weights: &[f64]) -> Vec<f64> {
    let top = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    log_weights.iter().map(|l| (l - top).exp()).collect()
}

/// `(Σw)² / Σw²`.
pub fn effective_sample_size(log_weights: &[f64]) -> f64 {
    let w = normalized_weights(log_weights);
    let s: f64 = w.iter().sum();
    let s2: f64 = w.iter().map(|x| x * x).sum();
    s * s / s2
}

/// Self-normalised mean with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedMean {
    pub mean: f64,
    pub std_err: f64,
}

pub fn weighted_mean(values: &[f64], weights: &[f64]) -> WeightedMean {
    assert_eq!(values.len(), weights.len());
    let total: f64 = weights.iter().sum();
    let mean = values.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() / total;
    let var = values
        .iter()
        .zip(weights)
        .map(|(x, w)| (w * (x - mean)).powi(2))
        .sum::<f64>()
        / (total * total);
    WeightedMean {
        mean,
        std_err: var.sqrt(),
    }
}

/// Plain mean and standard error of the mean.
pub fn mean_std_err(values: &[f64]) -> WeightedMean {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    WeightedMean {
        mean,
        std_err: (var / n).sqrt(),
    }
}

/// Ordinary least squares `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
        residual: (sse / nf).sqrt(),
    })
}

/// Linear-interpolated quantile of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Weighted quantile by cumulative weight.
pub fn weighted_quantile(values: &[f64], weights: &[f64], q: f64) -> f64 {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();
    let target = q.clamp(0.0, 1.0) * total;
    let mut acc = 0.0;
    for &i in &idx {
        acc += weights[i];
        if acc >= target {
            return values[i];
        }
    }
    values[*idx.last().expect("nonempty")]
}

/// Weighted Kolmogorov–Smirnov distance between the paired samples
/// `before[i]`, `after[i]` sharing weight `weights[i]`, evaluated on bins.
pub struct PairedKs {
    bins_before: Vec<usize>,
    bins_after: Vec<usize>,
    weights: Vec<f64>,
    n_bins: usize,
}

impl PairedKs {
    /// `bins = 0` uses every pooled value as a breakpoint.
    pub fn new(before: &[f64], after: &[f64], weights: &[f64], bins: usize) -> Self {
        let mut pooled: Vec<f64> = before.iter().chain(after).copied().collect();
        pooled.sort_by(f64::total_cmp);
        pooled.dedup();
        let edges: Vec<f64> = if bins == 0 || bins >= pooled.len() {
            pooled
        } else {
            let mut e: Vec<f64> = (1..=bins)
                .map(|b| quantile_sorted(&pooled, b as f64 / bins as f64))
                .collect();
            e.dedup();
            e
        };
        let locate = |x: f64| edges.partition_point(|e| *e < x).min(edges.len() - 1);
        Self {
            bins_before: before.iter().map(|&x| locate(x)).collect(),
            bins_after: after.iter().map(|&x| locate(x)).collect(),
            weights: weights.to_vec(),
            n_bins: edges.len(),
        }
    }

    fn distance_with(&self, swap: Option<&[bool]>) -> f64 {
        let mut diff = vec![0.0; self.n_bins];
        let total: f64 = self.weights.iter().sum();
        for i in 0..self.weights.len() {
            let (a, b) = match swap {
                Some(s) if s[i] => (self.bins_after[i], self.bins_before[i]),
                _ => (self.bins_before[i], self.bins_after[i]),
            };
            if a != b {
                diff[a] += self.weights[i];
                diff[b] -= self.weights[i];
            }
        }
        let mut acc = 0.0;
        let mut worst: f64 = 0.0;
        for d in diff {
            acc += d;
            worst = worst.max(acc.abs());
        }
        worst / total
    }

    pub fn distance(&self) -> f64 {
        self.distance_with(None)
    }

    /// Paired permutation p-value: each permutation swaps the two times of a
    /// sample with probability 1/2.
    pub fn permutation_p_value<R: Rng>(&self, permutations: usize, rng: &mut R) -> f64 {
        let observed = self.distance();
        if observed == 0.0 {
            return 1.0;
        }
        let mut swap = vec![false; self.weights.len()];
        let mut exceed = 0usize;
        for _ in 0..permutations {
            for s in swap.iter_mut() {
                *s = rng.random::<bool>();
            }
            if self.distance_with(Some(&swap)) >= observed {
                exceed += 1;
            }
        }
        (1 + exceed) as f64 / (1 + permutations) as f64
    }
}

/// Shuffled copy; used to check order independence of the statistics.
pub fn shuffled<T: Clone, R: Rng>(items: &[T], rng: &mut R) -> Vec<T> {
    let mut v = items.to_vec();
    v.shuffle(rng);
    v
}

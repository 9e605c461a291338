//! Free Gaussian measure `ρ_N`, the weighted Gibbs measure `μ_N`, and the
//! tail and decay diagnostics built on them.
//!
//! Under `ρ_N` the nonzero modes are independent with
//! `Re a_n, Im a_n ~ N(0, 1/n²)` and, for `n > 0`,
//! `Re b_n, Im b_n ~ N(0, 1/(2κn))`, `b_{-n} = conj(b_n)`. The zero modes carry
//! Lebesgue measure on the cutoff set
//! `Ω_{N,B} = { Σ|a_n|² <= B², |b_0| <= B }`.
//!
//! Ensembles are generated from one ChaCha stream per sample index, so the
//! output does not depend on how the work is split across threads.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::SBOParams;
use crate::error::{Error, Result};
use crate::spectral::{interaction_integral, pair_norm, RealSpectralField, SpectralField, SpectralPair};
use crate::stats::{self, LinearFit};

/// Random stream for sample `index` of an ensemble seeded by `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GibbsConfig {
    pub n_max: usize,
    /// Cutoff `B` of `Ω_{N,B}`.
    pub cutoff: f64,
    /// Tail level `K`.
    pub tail_level: f64,
    pub s1: f64,
    pub s2: f64,
    pub ensemble_size: usize,
    pub seed: u64,
    pub params: SBOParams,
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_max == 0 {
            return Err(Error::InvalidNMax(0));
        }
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return Err(Error::InvalidParameter(format!("cutoff B = {}", self.cutoff)));
        }
        if !(self.tail_level > 0.0 && self.tail_level.is_finite()) {
            return Err(Error::InvalidParameter(format!("tail level K = {}", self.tail_level)));
        }
        let (s1, s2) = (self.s1, self.s2);
        if !(0.0 < s1 && s1 < 0.5 && 0.5 < s2 && s2 < 1.0 && s2 < 2.0 * s1) {
            return Err(Error::InvalidParameter(format!(
                "regularities need 0 < s1 < 1/2 < s2 < 1 and s2 < 2 s1, got ({s1}, {s2})"
            )));
        }
        if self.ensemble_size == 0 {
            return Err(Error::InvalidParameter("ensemble_size must be >= 1".into()));
        }
        self.params.require_positive_kappa()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    pub state: SpectralPair,
    pub log_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEnsemble {
    pub samples: Vec<WeightedSample>,
    pub config: GibbsConfig,
}

impl WeightedEnsemble {
    pub fn log_weights(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.log_weight).collect()
    }

    /// Weights rescaled so the largest is one.
    pub fn weights(&self) -> Vec<f64> {
        stats::normalized_weights(&self.log_weights())
    }

    pub fn effective_sample_size(&self) -> f64 {
        stats::effective_sample_size(&self.log_weights())
    }

    /// True when the effective size falls below 1% of the ensemble.
    pub fn degenerate(&self) -> bool {
        self.effective_sample_size() < 0.01 * self.samples.len() as f64
    }

    /// Self-normalised expectation of an observable.
    pub fn expect(&self, f: impl Fn(&SpectralPair) -> f64) -> stats::WeightedMean {
        let values: Vec<f64> = self.samples.iter().map(|s| f(&s.state)).collect();
        stats::weighted_mean(&values, &self.weights())
    }
}

fn gaussian<R: Rng>(rng: &mut R, sd: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sd * z
}

/// Nonzero modes of a `ρ_N` draw: `a` in the centred layout (zero mode left
/// at 0) and the half of `b` (zero mode left at 0).
pub fn sample_nonzero_modes<R: Rng>(
    n_max: usize,
    kappa: f64,
    rng: &mut R,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = n_max as i64;
    let mut a = vec![Complex64::new(0.0, 0.0); 2 * n_max + 1];
    for k in (-n..=n).filter(|&k| k != 0) {
        let sd = 1.0 / k.unsigned_abs() as f64;
        let re = gaussian(rng, sd);
        let im = gaussian(rng, sd);
        a[(k + n) as usize] = Complex64::new(re, im);
    }
    let mut b = vec![Complex64::new(0.0, 0.0); n_max + 1];
    for (k, slot) in b.iter_mut().enumerate().skip(1) {
        let sd = (1.0 / (2.0 * kappa * k as f64)).sqrt();
        let re = gaussian(rng, sd);
        let im = gaussian(rng, sd);
        *slot = Complex64::new(re, im);
    }
    (a, b)
}

/// Draw from `ρ_N` with zero modes uniform on the cutoff set: `b_0` uniform on
/// `[-B, B]`, `a_0` uniform on the disk `|a_0|² <= B² - Σ_{n≠0}|a_n|²`; the
/// whole draw is repeated while that disk is empty.
pub fn sample_free<R: Rng>(config: &GibbsConfig, rng: &mut R) -> Result<SpectralPair> {
    config.params.require_positive_kappa()?;
    let b2 = config.cutoff * config.cutoff;
    let n = config.n_max;
    loop {
        let (mut a, mut b) = sample_nonzero_modes(n, config.params.kappa, rng);
        let rest: f64 = a.iter().map(|z| z.norm_sqr()).sum();
        let room = b2 - rest;
        // Consume the zero-mode draws even when rejecting, so the stream
        // layout is fixed per attempt.
        let r2: f64 = rng.random::<f64>();
        let theta: f64 = rng.random::<f64>();
        let b0: f64 = rng.random::<f64>();
        if room < 0.0 {
            continue;
        }
        a[n] = Complex64::from_polar((r2 * room).sqrt(), TAU * theta);
        b[0] = Complex64::new(config.cutoff * (2.0 * b0 - 1.0), 0.0);
        let u = SpectralField::from_coeffs(n, a)?;
        let v = RealSpectralField::from_half(n, &b)?;
        return SpectralPair::new(u, v);
    }
}

/// Mean-zero `ρ_N` draw (zero modes set to zero, no cutoff).
pub fn sample_gaussian<R: Rng>(n_max: usize, kappa: f64, rng: &mut R) -> Result<SpectralPair> {
    let (a, b) = sample_nonzero_modes(n_max, kappa, rng);
    SpectralPair::new(
        SpectralField::from_coeffs(n_max, a)?,
        RealSpectralField::from_half(n_max, &b)?,
    )
}

/// Membership in `Ω_{N,B}` (closed conditions).
pub fn cutoff_indicator(state: &SpectralPair, cutoff: f64) -> bool {
    let l2: f64 = state.u.coeffs().iter().map(|z| z.norm_sqr()).sum();
    l2.sqrt() <= cutoff && state.v.coeff(0).re.abs() <= cutoff
}

/// `(α/2) ∫ v |u|² dx`.
pub fn interaction_energy(state: &SpectralPair, params: &SBOParams) -> f64 {
    0.5 * params.alpha
        * interaction_integral(&state.u, &state.v).expect("a pair shares its truncation")
}

/// `ln(R²/B²)`, where `πR²` is the area of the `a_0` disk allowed by the
/// nonzero modes of `state`.
pub fn zero_mode_log_area(state: &SpectralPair, cutoff: f64) -> f64 {
    let b2 = cutoff * cutoff;
    let rest: f64 = state
        .u
        .modes()
        .filter(|(k, _)| *k != 0)
        .map(|(_, z)| z.norm_sqr())
        .sum();
    ((b2 - rest) / b2).ln()
}

/// Exponent of the Gibbs weight. The Gaussian density carries no `2π`, so the
/// interaction enters divided by `2π`; together they form `e^{-H/2π}`.
pub fn gibbs_exponent(state: &SpectralPair, params: &SBOParams) -> f64 {
    -interaction_energy(state, params) / TAU
}

/// Importance log-weight of a `sample_free` draw for `μ_N`: the Gibbs exponent
/// plus the correction turning the uniform-on-disk `a_0` into Lebesgue
/// measure on `Ω_{N,B}`.
pub fn log_weight(state: &SpectralPair, config: &GibbsConfig) -> f64 {
    gibbs_exponent(state, &config.params) + zero_mode_log_area(state, config.cutoff)
}

/// Self-normalised importance representation of `μ_N`.
pub fn sample_gibbs(config: &GibbsConfig) -> Result<WeightedEnsemble> {
    config.validate()?;
    let samples = (0..config.ensemble_size)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(config.seed, i as u64);
            let state = sample_free(config, &mut rng).map_err(|e| Error::Sample {
                index: i,
                seed: config.seed,
                source: Box::new(e),
            })?;
            let log_weight = log_weight(&state, config);
            Ok(WeightedSample { state, log_weight })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WeightedEnsemble {
        samples,
        config: *config,
    })
}

/// Monte Carlo estimate kept in log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogMeanEstimate {
    /// `ln` of the estimated mean.
    pub log_mean: f64,
    /// Standard error relative to the mean.
    pub rel_std_err: f64,
    pub draws: usize,
}

impl LogMeanEstimate {
    pub fn mean(&self) -> f64 {
        self.log_mean.exp()
    }

    fn from_log_terms(terms: &[f64]) -> Self {
        let draws = terms.len();
        let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return Self {
                log_mean: f64::NEG_INFINITY,
                rel_std_err: f64::INFINITY,
                draws,
            };
        }
        let scaled: Vec<f64> = terms.iter().map(|t| (t - top).exp()).collect();
        let m = stats::mean_std_err(&scaled);
        Self {
            log_mean: top + m.mean.ln(),
            rel_std_err: m.std_err / m.mean,
            draws,
        }
    }

    /// z-score of the difference between two independent estimates.
    pub fn z_difference(&self, other: &Self) -> f64 {
        let top = self.log_mean.max(other.log_mean);
        let a = (self.log_mean - top).exp();
        let b = (other.log_mean - top).exp();
        let sa = a * self.rel_std_err;
        let sb = b * other.rel_std_err;
        (a - b) / (sa * sa + sb * sb).sqrt()
    }
}

/// Per-draw `ln(e^{-rV/2π} χ_Ω · R²/B²)` under `ρ_N` with zero modes drawn
/// uniformly from the enclosing box `{|a_0| <= B} × [-B, B]`. Draws outside
/// `Ω_{N,B}` contribute zero.
fn box_log_terms(config: &GibbsConfig, r: f64) -> Vec<f64> {
    (0..config.ensemble_size)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(config.seed, i as u64);
            let (a, b) = sample_nonzero_modes(config.n_max, config.params.kappa, &mut rng);
            let b2 = config.cutoff * config.cutoff;
            let rest: f64 = a.iter().map(|z| z.norm_sqr()).sum();
            let r2: f64 = rng.random::<f64>();
            let theta: f64 = rng.random::<f64>();
            let b0: f64 = rng.random::<f64>();
            if rest > b2 {
                return f64::NEG_INFINITY;
            }
            let mut a = a;
            let mut b = b;
            a[config.n_max] = Complex64::from_polar((r2 * (b2 - rest)).sqrt(), TAU * theta);
            b[0] = Complex64::new(config.cutoff * (2.0 * b0 - 1.0), 0.0);
            let state = SpectralPair::new(
                SpectralField::from_coeffs(config.n_max, a).expect("finite"),
                RealSpectralField::from_half(config.n_max, &b).expect("finite"),
            )
            .expect("same truncation");
            r * gibbs_exponent(&state, &config.params) + ((b2 - rest) / b2).ln()
        })
        .collect()
}

/// `E[e^{-rV/2π} χ_Ω]` under `d(a_0, b_0) ⊗ dρ_N`, normalised by the zero-mode
/// box volume `2πB³` (see [`zero_mode_box_volume`]).
pub fn weight_moment(config: &GibbsConfig, r: f64) -> Result<LogMeanEstimate> {
    if !(r >= 1.0) {
        return Err(Error::InvalidParameter(format!("moment order r = {r} must be >= 1")));
    }
    config.validate()?;
    Ok(LogMeanEstimate::from_log_terms(&box_log_terms(config, r)))
}

/// Lebesgue volume `πB² · 2B` of the zero-mode box.
pub fn zero_mode_box_volume(cutoff: f64) -> f64 {
    2.0 * PI * cutoff.powi(3)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionEstimate {
    /// `Z_N` divided by the zero-mode box volume.
    pub normalized: LogMeanEstimate,
    pub box_volume: f64,
}

/// Monte Carlo estimate of `Z_N`.
pub fn partition_estimate(config: &GibbsConfig) -> Result<PartitionEstimate> {
    config.validate()?;
    Ok(PartitionEstimate {
        normalized: LogMeanEstimate::from_log_terms(&box_log_terms(config, 1.0)),
        box_volume: zero_mode_box_volume(config.cutoff),
    })
}

/// Grid of tail levels, chosen from the sample distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailGrid {
    pub points: usize,
    /// Exceedance probability at the lowest level.
    pub upper_prob: f64,
    /// Exceedance probability aimed for at the highest level.
    pub lower_prob: f64,
    /// Grid points with fewer exceedances are dropped.
    pub min_exceedances: usize,
}

impl Default for TailGrid {
    fn default() -> Self {
        Self {
            points: 12,
            upper_prob: 0.2,
            lower_prob: 1e-3,
            min_exceedances: 20,
        }
    }
}

/// Fit of `ln P(norm > K) = intercept - rate K²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// Fitted `c` in `e^{-cK²}`.
    pub rate: f64,
    pub fit: LinearFit,
    pub levels: Vec<f64>,
    pub exceedance: Vec<f64>,
    /// Levels removed for lack of exceedances.
    pub dropped: Vec<f64>,
}

fn tail_fit(norms: &[f64], weights: &[f64], grid: &TailGrid) -> Result<TailFit> {
    let total: f64 = weights.iter().sum();
    let lo = stats::weighted_quantile(norms, weights, 1.0 - grid.upper_prob);
    let hi = stats::weighted_quantile(norms, weights, 1.0 - grid.lower_prob);
    let steps = grid.points.max(2);
    let mut levels = Vec::new();
    let mut exceedance = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..steps {
        // Uniform in K², which is the fitted variable.
        let k2 = lo * lo + (hi * hi - lo * lo) * j as f64 / (steps - 1) as f64;
        let k = k2.sqrt();
        let mut count = 0usize;
        let mut mass = 0.0;
        for (x, w) in norms.iter().zip(weights) {
            if *x > k {
                count += 1;
                mass += w;
            }
        }
        if count < grid.min_exceedances || mass <= 0.0 {
            dropped.push(k);
        } else {
            levels.push(k);
            exceedance.push(mass / total);
        }
    }
    let x: Vec<f64> = levels.iter().map(|k| k * k).collect();
    let y: Vec<f64> = exceedance.iter().map(|p| p.ln()).collect();
    let fit = stats::linear_fit(&x, &y).ok_or_else(|| {
        Error::InsufficientData(format!(
            "{} tail levels left after dropping {}",
            levels.len(),
            dropped.len()
        ))
    })?;
    Ok(TailFit {
        rate: -fit.slope,
        fit,
        levels,
        exceedance,
        dropped,
    })
}

/// Square-exponential tail of `pair_norm(·, s1, s2)` under mean-zero `ρ_N`.
pub fn fernique_tail(config: &GibbsConfig, s1: f64, s2: f64, grid: &TailGrid) -> Result<TailFit> {
    config.params.require_positive_kappa()?;
    let norms: Vec<f64> = (0..config.ensemble_size)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(config.seed, i as u64);
            let p = sample_gaussian(config.n_max, config.params.kappa, &mut rng)
                .expect("finite draw");
            pair_norm(&p, s1, s2)
        })
        .collect();
    tail_fit(&norms, &vec![1.0; norms.len()], grid)
}

/// Weighted tail of `pair_norm(·, s1, s2)` under `μ_N`.
pub fn tightness_check(config: &GibbsConfig, grid: &TailGrid) -> Result<TailFit> {
    let ens = sample_gibbs(config)?;
    tightness_from_ensemble(&ens, grid)
}

pub fn tightness_from_ensemble(ens: &WeightedEnsemble, grid: &TailGrid) -> Result<TailFit> {
    let (s1, s2) = (ens.config.s1, ens.config.s2);
    let norms: Vec<f64> = ens.samples.iter().map(|s| pair_norm(&s.state, s1, s2)).collect();
    tail_fit(&norms, &ens.weights(), grid)
}

/// `M^{1-δ} max|g_n|² / Σ|g_n|²` over the dyadic block `M <= |n| < 2M`.
pub fn decay_statistic(m: usize, delta: f64, g: &[Complex64]) -> f64 {
    let mut top: f64 = 0.0;
    let mut sum = 0.0;
    for z in g {
        let a = z.norm_sqr();
        top = top.max(a);
        sum += a;
    }
    (m as f64).powf(1.0 - delta) * top / sum
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayStats {
    pub m: usize,
    pub delta: f64,
    pub median: f64,
    pub p95: f64,
    pub trials: usize,
}

/// Distribution of [`decay_statistic`] for i.i.d. standard complex Gaussians.
pub fn decay_ratio(m: usize, delta: f64, seed: u64, trials: usize) -> Result<DecayStats> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("delta = {delta}")));
    }
    if m < 2 || !m.is_power_of_two() {
        return Err(Error::InvalidParameter(format!("block size {m} is not a power of two >= 2")));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = sample_rng(seed ^ (m as u64).rotate_left(32), t as u64);
            let sd = std::f64::consts::FRAC_1_SQRT_2;
            // 2M modes: M <= |n| < 2M on both signs.
            let g: Vec<Complex64> = (0..2 * m)
                .map(|_| {
                    let re = gaussian(&mut rng, sd);
                    let im = gaussian(&mut rng, sd);
                    Complex64::new(re, im)
                })
                .collect();
            decay_statistic(m, delta, &g)
        })
        .collect();
    let mut sorted = values;
    sorted.sort_by(f64::total_cmp);
    Ok(DecayStats {
        m,
        delta,
        median: stats::quantile_sorted(&sorted, 0.5),
        p95: stats::quantile_sorted(&sorted, 0.95),
        trials,
    })
}

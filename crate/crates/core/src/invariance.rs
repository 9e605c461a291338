//! Two-time statistical tests of `μ_N` under the truncated flow, and the
//! divergence check on the Galerkin vector field.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{advance, conserved_quantities, rhs, SBOParams};
use crate::error::{Error, Result};
use crate::gibbs::{sample_free, sample_gibbs, sample_rng, GibbsConfig, WeightedEnsemble};
use crate::spectral::{interaction_integral, sobolev_norm_sq, RealSpectralField, SpectralField, SpectralPair};
use crate::stats::{self, PairedKs};

pub const OBSERVABLE_NAMES: [&str; 8] = [
    "E2",
    "E3",
    "H",
    "interaction",
    "low_mode_re",
    "low_mode_abs2",
    "sob_u",
    "sob_v",
];

/// Conserved quantities are checked pathwise as well as in distribution.
pub const CONSERVED_OBSERVABLES: [&str; 3] = ["E2", "E3", "H"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableVector {
    pub e2: f64,
    pub e3: f64,
    pub h: f64,
    /// `∫ v|u|²`
    pub interaction: f64,
    pub low_mode_re: f64,
    pub low_mode_abs2: f64,
    /// `‖u‖²_{H^{s1}}`
    pub sob_u: f64,
    /// `‖v‖²_{H^{s1-1/2}}`
    pub sob_v: f64,
}

impl ObservableVector {
    pub fn values(&self) -> [f64; 8] {
        [
            self.e2,
            self.e3,
            self.h,
            self.interaction,
            self.low_mode_re,
            self.low_mode_abs2,
            self.sob_u,
            self.sob_v,
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        OBSERVABLE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values()[i])
    }
}

pub fn observables(state: &SpectralPair, params: &SBOParams, s1: f64) -> Result<ObservableVector> {
    let c = conserved_quantities(state, params)?;
    let u1 = state.u.coeff(1);
    Ok(ObservableVector {
        e2: c.e2,
        e3: c.e3,
        h: c.h,
        interaction: interaction_integral(&state.u, &state.v)?,
        low_mode_re: u1.re,
        low_mode_abs2: u1.norm_sqr(),
        sob_u: sobolev_norm_sq(&state.u, s1),
        sob_v: sobolev_norm_sq(state.v.as_field(), s1 - 0.5),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableComparison {
    pub name: String,
    pub mean_initial: f64,
    pub std_err_initial: f64,
    pub mean_final: f64,
    pub std_err_final: f64,
    pub z: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub n_max: usize,
    pub samples: usize,
    pub seed: u64,
    pub t_final: f64,
    pub dt: f64,
    pub threshold: f64,
    pub effective_sample_size: f64,
    pub degenerate_weights: bool,
    pub observables: Vec<ObservableComparison>,
    /// Largest pathwise relative drift of E2, E3, H over the ensemble.
    pub max_drift: [f64; 3],
}

impl InvarianceReport {
    pub fn all_pass(&self) -> bool {
        self.observables.iter().all(|o| o.pass)
    }

    pub fn observable(&self, name: &str) -> Option<&ObservableComparison> {
        self.observables.iter().find(|o| o.name == name)
    }
}

/// A Gibbs ensemble together with every sample evolved to `t_final`.
#[derive(Debug, Clone)]
pub struct InvarianceRun {
    pub ensemble: WeightedEnsemble,
    pub t_final: f64,
    pub dt: f64,
    pub initial: Vec<ObservableVector>,
    pub evolved: Vec<SpectralPair>,
    pub final_obs: Vec<ObservableVector>,
}

/// Draws the ensemble and evolves each sample. `t_final = 0` skips the flow.
pub fn run_invariance(config: &GibbsConfig, t_final: f64, dt: f64) -> Result<InvarianceRun> {
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidParameter(format!("final time {t_final}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step {dt}")));
    }
    let ensemble = sample_gibbs(config)?;
    let params = config.params;
    let s1 = config.s1;
    let evolved_obs = ensemble
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let wrap = |e: Error| Error::Sample {
                index: i,
                seed: config.seed,
                source: Box::new(e),
            };
            let start = observables(&s.state, &params, s1).map_err(wrap)?;
            let end_state = if t_final == 0.0 {
                s.state.clone()
            } else {
                advance(&s.state, t_final, dt, &params).map_err(wrap)?
            };
            let end = observables(&end_state, &params, s1).map_err(wrap)?;
            Ok((start, end_state, end))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut initial = Vec::with_capacity(evolved_obs.len());
    let mut evolved = Vec::with_capacity(evolved_obs.len());
    let mut final_obs = Vec::with_capacity(evolved_obs.len());
    for (a, s, b) in evolved_obs {
        initial.push(a);
        evolved.push(s);
        final_obs.push(b);
    }
    Ok(InvarianceRun {
        ensemble,
        t_final,
        dt,
        initial,
        evolved,
        final_obs,
    })
}

fn relative_drift(a: f64, b: f64) -> f64 {
    let d = (b - a).abs();
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(f64::MIN_POSITIVE)
    }
}

impl InvarianceRun {
    pub fn report(&self, threshold: f64) -> InvarianceReport {
        let w = self.ensemble.weights();
        let observables = OBSERVABLE_NAMES
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let x0: Vec<f64> = self.initial.iter().map(|o| o.values()[k]).collect();
                let x1: Vec<f64> = self.final_obs.iter().map(|o| o.values()[k]).collect();
                let m0 = stats::weighted_mean(&x0, &w);
                let m1 = stats::weighted_mean(&x1, &w);
                let diff = m1.mean - m0.mean;
                let se = (m0.std_err.powi(2) + m1.std_err.powi(2)).sqrt();
                let z = if diff == 0.0 { 0.0 } else { diff / se };
                ObservableComparison {
                    name: name.to_string(),
                    mean_initial: m0.mean,
                    std_err_initial: m0.std_err,
                    mean_final: m1.mean,
                    std_err_final: m1.std_err,
                    z,
                    pass: z.abs() <= threshold,
                }
            })
            .collect();
        let mut max_drift = [0.0f64; 3];
        for (a, b) in self.initial.iter().zip(&self.final_obs) {
            max_drift[0] = max_drift[0].max(relative_drift(a.e2, b.e2));
            max_drift[1] = max_drift[1].max(relative_drift(a.e3, b.e3));
            max_drift[2] = max_drift[2].max(relative_drift(a.h, b.h));
        }
        let cfg = &self.ensemble.config;
        InvarianceReport {
            n_max: cfg.n_max,
            samples: self.ensemble.samples.len(),
            seed: cfg.seed,
            t_final: self.t_final,
            dt: self.dt,
            threshold,
            effective_sample_size: self.ensemble.effective_sample_size(),
            degenerate_weights: self.ensemble.degenerate(),
            observables,
            max_drift,
        }
    }

    /// Weighted two-time KS test on one observable.
    pub fn distribution_test(
        &self,
        name: &str,
        bins: usize,
        permutations: usize,
        seed: u64,
    ) -> Result<KsResult> {
        let k = OBSERVABLE_NAMES
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown observable {name}")))?;
        let x0: Vec<f64> = self.initial.iter().map(|o| o.values()[k]).collect();
        let x1: Vec<f64> = self.final_obs.iter().map(|o| o.values()[k]).collect();
        let ks = PairedKs::new(&x0, &x1, &self.ensemble.weights(), bins);
        let mut rng = sample_rng(seed, u64::MAX);
        Ok(KsResult {
            observable: name.to_string(),
            distance: ks.distance(),
            p_value: ks.permutation_p_value(permutations, &mut rng),
            permutations,
        })
    }
}

pub fn run_invariance_test(config: &GibbsConfig, t_final: f64, dt: f64) -> Result<InvarianceReport> {
    Ok(run_invariance(config, t_final, dt)?.report(3.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub observable: String,
    pub distance: f64,
    pub p_value: f64,
    pub permutations: usize,
}

pub fn two_time_distribution_test(
    config: &GibbsConfig,
    t_final: f64,
    dt: f64,
    observable: &str,
    bins: usize,
) -> Result<KsResult> {
    run_invariance(config, t_final, dt)?.distribution_test(observable, bins, 1000, config.seed)
}

/// Real coordinates `(Re a_n, Im a_n)_{|n|<=N}, b_0, (Re b_n, Im b_n)_{0<n<=N}`.
pub fn to_real_coords(p: &SpectralPair) -> Vec<f64> {
    let mut x = Vec::with_capacity(6 * p.n_max() + 3);
    for z in p.u.coeffs() {
        x.push(z.re);
        x.push(z.im);
    }
    let half = p.v.half();
    x.push(half[0].re);
    for z in &half[1..] {
        x.push(z.re);
        x.push(z.im);
    }
    x
}

pub fn from_real_coords(n_max: usize, x: &[f64]) -> Result<SpectralPair> {
    let nu = 2 * n_max + 1;
    let expected = 2 * nu + 1 + 2 * n_max;
    if x.len() != expected {
        return Err(Error::CoefficientCount {
            expected,
            got: x.len(),
        });
    }
    let u: Vec<Complex64> = (0..nu).map(|i| Complex64::new(x[2 * i], x[2 * i + 1])).collect();
    let base = 2 * nu;
    let mut half = vec![Complex64::new(x[base], 0.0)];
    for k in 0..n_max {
        half.push(Complex64::new(x[base + 1 + 2 * k], x[base + 2 + 2 * k]));
    }
    SpectralPair::new(
        SpectralField::from_coeffs(n_max, u)?,
        RealSpectralField::from_half(n_max, &half)?,
    )
}

/// Divergence of the Galerkin field at `state` by central differences along
/// every real coordinate, relative to the field's rate `‖F(x)‖/‖x‖`.
pub fn relative_divergence(state: &SpectralPair, params: &SBOParams, h_rel: f64) -> Result<f64> {
    let n_max = state.n_max();
    let x = to_real_coords(state);
    let norm_x = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm_x == 0.0 {
        return Ok(0.0);
    }
    let f0 = to_real_coords(&rhs(state, params)?);
    let norm_f = f0.iter().map(|a| a * a).sum::<f64>().sqrt();
    let h = h_rel * norm_x;
    let mut div = 0.0;
    let mut xp = x.clone();
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let fp = to_real_coords(&rhs(&from_real_coords(n_max, &xp)?, params)?)[i];
        xp[i] = x[i] - h;
        let fm = to_real_coords(&rhs(&from_real_coords(n_max, &xp)?, params)?)[i];
        xp[i] = x[i];
        div += (fp - fm) / (2.0 * h);
    }
    let scale = (norm_f / norm_x).max(f64::MIN_POSITIVE);
    Ok(div.abs() / scale)
}

/// Largest relative divergence over `probes` states drawn like Gibbs samples.
pub fn liouville_check(config: &GibbsConfig, probes: usize) -> Result<f64> {
    if probes == 0 {
        return Err(Error::InvalidParameter("probes must be >= 1".into()));
    }
    let values = (0..probes)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(config.seed, i as u64);
            let state = sample_free(config, &mut rng)?;
            relative_divergence(&state, &config.params, 1e-5)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(values.into_iter().fold(0.0, f64::max))
}

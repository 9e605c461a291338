//! Experiment configuration: one TOML file with a section per module.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use sbo_core::gibbs::{GibbsConfig, TailGrid};
use sbo_core::SBOParams;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Ndjson,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Ndjson => "ndjson",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub format: Format,
    /// Output directory. Not echoed: it does not affect artifact contents.
    #[serde(skip_serializing)]
    pub out: PathBuf,
    /// Parallel map width. Not echoed for the same reason.
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 20261014,
            format: Format::Csv,
            out: PathBuf::from("out"),
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSection {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for ParamsSection {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            beta: 0.01,
            gamma: -2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GibbsSection {
    pub n_max: usize,
    pub cutoff: f64,
    pub tail_level: f64,
    pub s1: f64,
    pub s2: f64,
    pub ensemble_size: usize,
}

impl Default for GibbsSection {
    fn default() -> Self {
        Self {
            n_max: 8,
            cutoff: 10.0,
            tail_level: 5.0,
            s1: 0.4,
            s2: 0.7,
            ensemble_size: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub t_final: f64,
    pub dt: f64,
    pub record_every: usize,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            t_final: 1.0,
            dt: 1e-3,
            record_every: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialData {
    /// All coefficients zero.
    Zero,
    /// Uniform coefficients in the unit square, each component scaled to `amplitude` in L².
    Random,
    /// Sample 0 of the configured Gibbs ensemble.
    Gibbs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub initial: InitialData,
    pub amplitude: f64,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            initial: InitialData::Random,
            amplitude: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvarianceSection {
    pub threshold: f64,
    pub ks_observable: String,
    /// 0 uses every pooled value as a breakpoint.
    pub ks_bins: usize,
    pub ks_permutations: usize,
}

impl Default for InvarianceSection {
    fn default() -> Self {
        Self {
            threshold: 3.0,
            ks_observable: "low_mode_abs2".into(),
            ks_bins: 0,
            ks_permutations: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasureSection {
    pub n_max_list: Vec<usize>,
    pub tail_samples: usize,
    pub tail_points: usize,
    pub upper_prob: f64,
    pub lower_prob: f64,
    pub min_exceedances: usize,
    pub decay_delta: f64,
    pub decay_log2_m: Vec<u32>,
    pub decay_trials: usize,
    pub moment_orders: Vec<f64>,
}

impl Default for MeasureSection {
    fn default() -> Self {
        Self {
            n_max_list: vec![8, 16],
            tail_samples: 20_000,
            tail_points: 12,
            upper_prob: 0.2,
            lower_prob: 1e-3,
            min_exceedances: 20,
            decay_delta: 0.5,
            decay_log2_m: (4..=12).collect(),
            decay_trials: 1000,
            moment_orders: vec![1.0, 2.0],
        }
    }
}

impl MeasureSection {
    pub fn grid(&self) -> TailGrid {
        TailGrid {
            points: self.tail_points,
            upper_prob: self.upper_prob,
            lower_prob: self.lower_prob,
            min_exceedances: self.min_exceedances,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResonanceSection {
    pub gamma: f64,
    /// Lattice cap of the enumerated resonant set.
    pub set_cap: i64,
    pub s_values: Vec<f64>,
    pub caps: Vec<i64>,
    /// Exponent `b` of the `(1 + |n2||R|)^b` factor.
    pub b: f64,
    pub dirichlet_gamma: f64,
    pub dirichlet_cap: i64,
}

impl Default for ResonanceSection {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            set_cap: 32,
            s_values: vec![0.0, 0.25, 0.45],
            caps: vec![64, 128, 256, 512],
            b: 0.5,
            dirichlet_gamma: std::f64::consts::SQRT_2,
            dirichlet_cap: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IllposedSection {
    pub s: f64,
    pub gamma: f64,
    pub beta: f64,
    pub t: f64,
    pub n_list: Vec<i64>,
}

impl Default for IllposedSection {
    fn default() -> Self {
        Self {
            s: 0.25,
            gamma: 2.0,
            beta: 1.0,
            t: 0.1,
            n_list: (2..=9).map(|k| 1 << k).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub params: ParamsSection,
    pub gibbs: GibbsSection,
    pub integrator: IntegratorSection,
    pub simulate: SimulateSection,
    pub invariance: InvarianceSection,
    pub measure: MeasureSection,
    pub resonance: ResonanceSection,
    pub illposed: IllposedSection,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text)
    }

    /// Canonical text of the resolved configuration, embedded in every artifact.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("plain data serializes")
    }

    pub fn params(&self) -> Result<SBOParams, CliError> {
        let p = &self.params;
        SBOParams::new(p.alpha, p.beta, p.gamma).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn gibbs_config(&self) -> Result<GibbsConfig, CliError> {
        let g = &self.gibbs;
        let cfg = GibbsConfig {
            n_max: g.n_max,
            cutoff: g.cutoff,
            tail_level: g.tail_level,
            s1: g.s1,
            s2: g.s2,
            ensemble_size: g.ensemble_size,
            seed: self.run.seed,
            params: self.params()?,
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    fn bad(msg: impl Into<String>) -> CliError {
        CliError::Config(msg.into())
    }

    /// Checks every section a command could read, before any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.run.seed > i64::MAX as u64 {
            return Err(Self::bad(format!("seed {} exceeds {}", self.run.seed, i64::MAX)));
        }
        if self.run.workers == Some(0) {
            return Err(Self::bad("workers must be >= 1"));
        }
        self.params()?;
        let i = &self.integrator;
        if !(i.dt > 0.0 && i.dt.is_finite()) {
            return Err(Self::bad(format!("integrator.dt = {}", i.dt)));
        }
        if !(i.t_final >= 0.0 && i.t_final.is_finite()) {
            return Err(Self::bad(format!("integrator.t_final = {}", i.t_final)));
        }
        if i.record_every == 0 {
            return Err(Self::bad("integrator.record_every must be >= 1"));
        }
        if self.gibbs.n_max == 0 {
            return Err(Self::bad("gibbs.n_max must be >= 1"));
        }
        if !(self.simulate.amplitude >= 0.0 && self.simulate.amplitude.is_finite()) {
            return Err(Self::bad(format!("simulate.amplitude = {}", self.simulate.amplitude)));
        }
        let inv = &self.invariance;
        if !(inv.threshold > 0.0) {
            return Err(Self::bad(format!("invariance.threshold = {}", inv.threshold)));
        }
        if !sbo_core::invariance::OBSERVABLE_NAMES.contains(&inv.ks_observable.as_str()) {
            return Err(Self::bad(format!(
                "invariance.ks_observable = {:?}; expected one of {:?}",
                inv.ks_observable,
                sbo_core::invariance::OBSERVABLE_NAMES
            )));
        }
        let m = &self.measure;
        if m.n_max_list.is_empty() || m.n_max_list.contains(&0) {
            return Err(Self::bad("measure.n_max_list needs positive entries"));
        }
        if m.tail_samples == 0 || m.decay_trials == 0 {
            return Err(Self::bad("measure sample counts must be >= 1"));
        }
        if !(0.0 < m.lower_prob && m.lower_prob < m.upper_prob && m.upper_prob < 1.0) {
            return Err(Self::bad("measure needs 0 < lower_prob < upper_prob < 1"));
        }
        if !(m.decay_delta > 0.0 && m.decay_delta <= 1.0) {
            return Err(Self::bad(format!("measure.decay_delta = {}", m.decay_delta)));
        }
        if m.decay_log2_m.iter().any(|&k| k == 0 || k > 24) {
            return Err(Self::bad("measure.decay_log2_m entries must lie in 1..=24"));
        }
        if m.moment_orders.iter().any(|&r| !(r >= 1.0)) {
            return Err(Self::bad("measure.moment_orders entries must be >= 1"));
        }
        let r = &self.resonance;
        if !r.gamma.is_finite() || r.gamma == 0.0 {
            return Err(Self::bad(format!("resonance.gamma = {}", r.gamma)));
        }
        if r.set_cap < 1 || r.caps.iter().any(|&c| c < 2) {
            return Err(Self::bad("resonance caps must be >= 2"));
        }
        if r.dirichlet_cap < 1 {
            return Err(Self::bad("resonance.dirichlet_cap must be >= 1"));
        }
        let ip = &self.illposed;
        if ip.n_list.is_empty() || ip.n_list.iter().any(|&n| n < 1) {
            return Err(Self::bad("illposed.n_list needs positive entries"));
        }
        if !(ip.t > 0.0 && ip.t.is_finite()) {
            return Err(Self::bad(format!("illposed.t = {}", ip.t)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        let mut c = ExperimentConfig::default();
        c.params.gamma = 0.1 + 0.2;
        c.run.seed = 7;
        let back = ExperimentConfig::parse(&c.echo()).unwrap();
        assert_eq!(back.echo(), c.echo());
        assert_eq!(back.params, c.params);
    }

    #[test]
    fn echo_omits_out_and_workers() {
        let mut a = ExperimentConfig::default();
        let mut b = a.clone();
        a.run.workers = Some(1);
        b.run.workers = Some(8);
        b.run.out = "elsewhere".into();
        assert_eq!(a.echo(), b.echo());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::parse("[gibbs]\nnmax = 3\n").is_err());
        assert!(ExperimentConfig::parse("[nope]\n").is_err());
    }

    #[test]
    fn partial_sections_fill_defaults() {
        let c = ExperimentConfig::parse("[gibbs]\nn_max = 4\n").unwrap();
        assert_eq!(c.gibbs.n_max, 4);
        assert_eq!(c.gibbs.cutoff, 10.0);
        c.validate().unwrap();
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut c = ExperimentConfig::default();
        c.integrator.dt = 0.0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.params.alpha = 0.0;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.invariance.ks_observable = "E9".into();
        assert!(c.validate().is_err());
    }
}

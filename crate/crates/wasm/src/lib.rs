//! Browser bindings: a live Galerkin simulation, the resonance multiplier scan
//! and the near-resonance search.

use wasm_bindgen::prelude::*;

use sbo_core::dynamics::{conserved_quantities, PairBuf, StrangStepper};
use sbo_core::gibbs::{sample_free, sample_rng, GibbsConfig};
use sbo_core::resonance::{dirichlet_search, multiplier_sup, Region};
use sbo_core::{SBOParams, SpectralPair};

fn js(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

#[wasm_bindgen]
pub struct Simulation {
    params: SBOParams,
    stepper: StrangStepper,
    state: PairBuf,
    time: f64,
}

#[wasm_bindgen]
impl Simulation {
    /// Starts from a Gibbs-style draw with cutoff `b`.
    #[wasm_bindgen(constructor)]
    pub fn new(
        n_max: usize,
        alpha: f64,
        beta: f64,
        gamma: f64,
        b: f64,
        dt: f64,
        seed: u64,
    ) -> Result<Simulation, JsValue> {
        let params = SBOParams::new(alpha, beta, gamma).map_err(js)?;
        let cfg = GibbsConfig {
            n_max,
            cutoff: b,
            tail_level: 1.0,
            s1: 0.4,
            s2: 0.7,
            ensemble_size: 1,
            seed,
            params,
        };
        cfg.validate().map_err(js)?;
        let start = sample_free(&cfg, &mut sample_rng(seed, 0)).map_err(js)?;
        Ok(Simulation {
            params,
            stepper: StrangStepper::new(n_max, dt, params).map_err(js)?,
            state: PairBuf::from_pair(&start),
            time: 0.0,
        })
    }

    pub fn step(&mut self, steps: usize) -> Result<(), JsValue> {
        for _ in 0..steps {
            self.stepper.step(&mut self.state);
        }
        self.time += steps as f64 * self.stepper.dt();
        if self.state.is_finite() {
            Ok(())
        } else {
            Err(js("solution blew up; reduce dt or the couplings"))
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    fn pair(&self) -> Result<SpectralPair, JsValue> {
        self.state.to_pair().map_err(js)
    }

    /// `[E1, E2, E3, H]`.
    pub fn conserved(&self) -> Result<Vec<f64>, JsValue> {
        let c = conserved_quantities(&self.pair()?, &self.params).map_err(js)?;
        Ok(vec![c.e1, c.e2, c.e3, c.h])
    }

    /// `|u|²` then `v` on `points` equispaced nodes.
    pub fn profiles(&self, points: usize) -> Result<Vec<f64>, JsValue> {
        let p = self.pair()?;
        let mut out: Vec<f64> = p.u.evaluate_grid(points).iter().map(|z| z.norm_sqr()).collect();
        out.extend(p.v.evaluate_grid(points));
        Ok(out)
    }
}

/// Log-log points `(ln cap, ln sup)` of the multiplier over `A` or its complement.
#[wasm_bindgen]
pub fn multiplier_scan(s: f64, gamma: f64, complement: bool, caps: Vec<i64>) -> Result<Vec<f64>, JsValue> {
    let region = if complement { Region::AComplement } else { Region::A };
    let mut out = Vec::with_capacity(2 * caps.len());
    for cap in caps {
        let m = multiplier_sup(s, gamma, cap, region, 0.5).map_err(js)?;
        out.push((cap as f64).ln());
        out.push(m.value.ln());
    }
    Ok(out)
}

/// Flattened `(N, n1, |Q|, verified)` rows of the near-resonance search.
#[wasm_bindgen]
pub fn near_resonances(gamma: f64, n_cap: i64) -> Result<Vec<f64>, JsValue> {
    let rep = dirichlet_search(gamma, n_cap).map_err(js)?;
    Ok(rep
        .candidates
        .iter()
        .flat_map(|c| [c.n as f64, c.n1 as f64, c.q_abs, if c.verified { 1.0 } else { 0.0 }])
        .collect())
}

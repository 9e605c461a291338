//! Galerkin-truncated Schrödinger–Benjamin-Ono flow
//!
//! ```text
//! i u_t + u_xx = α v u
//! v_t + γ H v_xx = β (|u|²)_x
//! ```
//!
//! on modes `|n| <= N`, with both products projected back by `P_N`. Time
//! stepping is Strang splitting: the dispersive part is an exact phase per mode
//! and the coupling part is integrated with classical RK4 substeps.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::product::ProductEngine;
use crate::spectral::{
    check_same, interaction_integral, RealSpectralField, SpectralField, SpectralPair,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Reference substep length for the coupling integrator.
pub const NONLINEAR_SUBSTEP: f64 = 1e-3;

/// Coupling constants `α, β, γ` and the derived `κ = -αγ/(2β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SBOParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub kappa: f64,
}

impl SBOParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        for (name, x) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
            if !x.is_finite() || x == 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and nonzero, got {x}"
                )));
            }
        }
        Ok(Self {
            alpha,
            beta,
            gamma,
            kappa: -alpha * gamma / (2.0 * beta),
        })
    }

    /// The decoupled linear system (`α = β = 0`). Outside the physical
    /// parameter range; used to isolate the dispersive flow.
    pub fn linear(gamma: f64) -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
            gamma,
            kappa: 0.0,
        }
    }

    pub fn require_positive_kappa(&self) -> Result<()> {
        if self.kappa > 0.0 && self.kappa.is_finite() {
            Ok(())
        } else {
            Err(Error::NonPositiveKappa(self.kappa))
        }
    }
}

/// Working representation: `u` in the centred layout, `v` by its half.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBuf {
    pub n_max: usize,
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
}

impl PairBuf {
    pub fn from_pair(p: &SpectralPair) -> Self {
        Self {
            n_max: p.n_max(),
            u: p.u.coeffs().to_vec(),
            v: p.v.half().to_vec(),
        }
    }

    pub fn to_pair(&self) -> Result<SpectralPair> {
        let u = SpectralField::from_coeffs(self.n_max, self.u.clone())?;
        let v = RealSpectralField::from_half(self.n_max, &self.v)?;
        SpectralPair::new(u, v)
    }

    fn zeros(n_max: usize) -> Self {
        Self {
            n_max,
            u: vec![ZERO; 2 * n_max + 1],
            v: vec![ZERO; n_max + 1],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u
            .iter()
            .chain(&self.v)
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Evaluates the coupling terms `-iα P_N(vu)` and `iβ n P_N(|u|²)(n)`.
struct CouplingField {
    engine: ProductEngine,
    abs2: Vec<Complex64>,
}

impl CouplingField {
    fn new(n_max: usize) -> Self {
        Self {
            engine: ProductEngine::new(n_max),
            abs2: vec![ZERO; n_max + 1],
        }
    }

    fn eval(&mut self, params: &SBOParams, s: &PairBuf, du: &mut [Complex64], dv: &mut [Complex64]) {
        self.engine.real_times(&s.v, &s.u, du);
        let ca = Complex64::new(0.0, -params.alpha);
        for z in du.iter_mut() {
            *z *= ca;
        }
        self.engine.abs2_half(&s.u, &mut self.abs2);
        dv[0] = ZERO;
        for k in 1..dv.len() {
            dv[k] = Complex64::new(0.0, params.beta * k as f64) * self.abs2[k];
        }
    }
}

/// Time derivative of the full Galerkin system. The `v` component is returned
/// as an exactly Hermitian field.
pub fn rhs(state: &SpectralPair, params: &SBOParams) -> Result<SpectralPair> {
    let s = PairBuf::from_pair(state);
    let mut out = PairBuf::zeros(s.n_max);
    let mut coupling = CouplingField::new(s.n_max);
    coupling.eval(params, &s, &mut out.u, &mut out.v);
    add_linear_tangent(params, &s, &mut out);
    out.to_pair()
}

fn add_linear_tangent(params: &SBOParams, s: &PairBuf, out: &mut PairBuf) {
    let n = s.n_max as i64;
    for k in -n..=n {
        let i = (k + n) as usize;
        out.u[i] += Complex64::new(0.0, -((k * k) as f64)) * s.u[i];
    }
    for k in 1..=n {
        let i = k as usize;
        out.v[i] += Complex64::new(0.0, -params.gamma * (k * k) as f64) * s.v[i];
    }
}

/// Phase factors of the exact dispersive flow over time `t`.
struct LinearPhases {
    u: Vec<Complex64>,
    v: Vec<Complex64>,
}

impl LinearPhases {
    fn new(n_max: usize, gamma: f64, t: f64) -> Self {
        let n = n_max as i64;
        let u = (-n..=n)
            .map(|k| Complex64::from_polar(1.0, -((k * k) as f64) * t))
            .collect();
        let v = (0..=n)
            .map(|k| {
                if k == 0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::from_polar(1.0, -gamma * (k * k) as f64 * t)
                }
            })
            .collect();
        Self { u, v }
    }

    fn apply(&self, s: &mut PairBuf) {
        for (z, p) in s.u.iter_mut().zip(&self.u) {
            *z *= p;
        }
        for (z, p) in s.v.iter_mut().zip(&self.v) {
            *z *= p;
        }
    }
}

/// Exact linear propagator: `û(n) e^{-i n² t}`, `v̂(n) e^{-iγ|n|n t}`.
pub fn linear_flow(state: &SpectralPair, t: f64, gamma: f64) -> SpectralPair {
    if t == 0.0 {
        return state.clone();
    }
    let mut s = PairBuf::from_pair(state);
    LinearPhases::new(s.n_max, gamma, t).apply(&mut s);
    s.to_pair().expect("unit-modulus phases keep the state finite")
}

/// Number of RK4 substeps used for a coupling step of length `dt`.
pub fn coupling_substeps(dt: f64) -> usize {
    4usize.max((dt / NONLINEAR_SUBSTEP).ceil() as usize)
}

/// Reusable Strang step of fixed length.
pub struct StrangStepper {
    params: SBOParams,
    dt: f64,
    substeps: usize,
    half: LinearPhases,
    coupling: CouplingField,
    k: [PairBuf; 4],
    stage: PairBuf,
}

impl StrangStepper {
    pub fn new(n_max: usize, dt: f64, params: SBOParams) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "time step must be positive, got {dt}"
            )));
        }
        let z = || PairBuf::zeros(n_max);
        Ok(Self {
            params,
            dt,
            substeps: coupling_substeps(dt),
            half: LinearPhases::new(n_max, params.gamma, 0.5 * dt),
            coupling: CouplingField::new(n_max),
            k: [z(), z(), z(), z()],
            stage: z(),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&mut self, s: &mut PairBuf) {
        self.half.apply(s);
        let h = self.dt / self.substeps as f64;
        for _ in 0..self.substeps {
            self.rk4(s, h);
        }
        self.half.apply(s);
    }

    fn rk4(&mut self, s: &mut PairBuf, h: f64) {
        let Self {
            params,
            coupling,
            k,
            stage,
            ..
        } = self;
        let [k1, k2, k3, k4] = k;
        coupling.eval(params, s, &mut k1.u, &mut k1.v);
        axpy_into(stage, s, 0.5 * h, k1);
        coupling.eval(params, stage, &mut k2.u, &mut k2.v);
        axpy_into(stage, s, 0.5 * h, k2);
        coupling.eval(params, stage, &mut k3.u, &mut k3.v);
        axpy_into(stage, s, h, k3);
        coupling.eval(params, stage, &mut k4.u, &mut k4.v);
        let w = h / 6.0;
        for i in 0..s.u.len() {
            s.u[i] += w * (k1.u[i] + 2.0 * k2.u[i] + 2.0 * k3.u[i] + k4.u[i]);
        }
        for i in 0..s.v.len() {
            s.v[i] += w * (k1.v[i] + 2.0 * k2.v[i] + 2.0 * k3.v[i] + k4.v[i]);
        }
    }
}

fn axpy_into(out: &mut PairBuf, x: &PairBuf, a: f64, y: &PairBuf) {
    for i in 0..x.u.len() {
        out.u[i] = x.u[i] + a * y.u[i];
    }
    for i in 0..x.v.len() {
        out.v[i] = x.v[i] + a * y.v[i];
    }
}

/// One Strang step: half linear flow, coupling step, half linear flow.
pub fn step_strang(state: &SpectralPair, dt: f64, params: &SBOParams) -> Result<SpectralPair> {
    let mut stepper = StrangStepper::new(state.n_max(), dt, *params)?;
    let mut s = PairBuf::from_pair(state);
    stepper.step(&mut s);
    if !s.is_finite() {
        return Err(Error::Integrator {
            step: 0,
            reason: "non-finite state".into(),
        });
    }
    s.to_pair()
}

/// Recorded solution samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralPair>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&SpectralPair> {
        self.states.last()
    }
}

/// Step counts for reaching `t_final` with nominal step `dt`; the last step
/// is shortened so the final time is exactly `t_final`.
pub fn step_plan(t_final: f64, dt: f64) -> (usize, f64) {
    let ratio = t_final / dt;
    let mut steps = ratio.round() as usize;
    if (ratio - steps as f64).abs() > 1e-9 * ratio.max(1.0) {
        steps = ratio.ceil() as usize;
    }
    let steps = steps.max(1);
    let last = t_final - (steps - 1) as f64 * dt;
    (steps, last)
}

/// Advances `state` to `t_final` without recording. Returns the final state.
pub fn advance(state: &SpectralPair, t_final: f64, dt: f64, params: &SBOParams) -> Result<SpectralPair> {
    let mut s = PairBuf::from_pair(state);
    advance_buf(&mut s, t_final, dt, params, |_, _, _| ())?;
    s.to_pair()
}

fn advance_buf(
    s: &mut PairBuf,
    t_final: f64,
    dt: f64,
    params: &SBOParams,
    mut on_step: impl FnMut(usize, f64, &PairBuf),
) -> Result<()> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "final time must be positive, got {t_final}"
        )));
    }
    let (steps, last) = step_plan(t_final, dt);
    let mut regular = StrangStepper::new(s.n_max, dt, *params)?;
    let mut tail = if (last - dt).abs() > 1e-12 * dt {
        Some(StrangStepper::new(s.n_max, last, *params)?)
    } else {
        None
    };
    for i in 1..=steps {
        match (&mut tail, i == steps) {
            (Some(t), true) => t.step(s),
            _ => regular.step(s),
        }
        if !s.is_finite() {
            return Err(Error::Integrator {
                step: i,
                reason: "non-finite state".into(),
            });
        }
        let t = if i == steps { t_final } else { i as f64 * dt };
        on_step(i, t, s);
    }
    Ok(())
}

/// Repeated Strang steps to `t_final`, recording every `record_every` steps
/// plus both endpoints.
pub fn evolve(
    state: &SpectralPair,
    t_final: f64,
    dt: f64,
    params: &SBOParams,
    record_every: usize,
) -> Result<Trajectory> {
    if record_every == 0 {
        return Err(Error::InvalidParameter("record_every must be >= 1".into()));
    }
    let (steps, _) = step_plan(t_final.max(f64::MIN_POSITIVE), dt);
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![state.clone()],
    };
    let mut s = PairBuf::from_pair(state);
    let mut failure = None;
    advance_buf(&mut s, t_final, dt, params, |i, t, buf| {
        if failure.is_some() {
            return;
        }
        if i % record_every == 0 || i == steps {
            match buf.to_pair() {
                Ok(p) => {
                    traj.times.push(t);
                    traj.states.push(p);
                }
                Err(e) => failure = Some(e),
            }
        }
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(traj),
    }
}

/// Conservation laws of the truncated system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conserved {
    /// `∫ v`
    pub e1: f64,
    /// `∫ |u|²`
    pub e2: f64,
    /// `Im ∫ u conj(u_x) + α/(2β) ∫ v²`
    pub e3: f64,
    /// Hamiltonian `½∫|u_x|² + κ/2 ∫(D^{1/2}v)² + α/2 ∫ v|u|²`
    pub h: f64,
}

pub fn conserved_quantities(state: &SpectralPair, params: &SBOParams) -> Result<Conserved> {
    check_same(state.u.n_max(), state.v.n_max())?;
    let mut mass = 0.0;
    let mut momentum = 0.0;
    let mut kinetic = 0.0;
    for (k, c) in state.u.modes() {
        let a2 = c.norm_sqr();
        mass += a2;
        momentum -= k as f64 * a2;
        kinetic += (k * k) as f64 * a2;
    }
    let half = state.v.half();
    let mut v_l2 = half[0].norm_sqr();
    let mut v_half_deriv = 0.0;
    for (k, c) in half.iter().enumerate().skip(1) {
        v_l2 += 2.0 * c.norm_sqr();
        v_half_deriv += 2.0 * k as f64 * c.norm_sqr();
    }
    let interaction = interaction_integral(&state.u, &state.v)?;
    // κ/2 = -αγ/(4β); written through α, β, γ so the linear system works too.
    let quad_v = if params.beta == 0.0 {
        0.0
    } else {
        -params.alpha * params.gamma / (4.0 * params.beta)
    };
    let e3_coupling = if params.beta == 0.0 {
        0.0
    } else {
        params.alpha / (2.0 * params.beta)
    };
    Ok(Conserved {
        e1: TAU * half[0].re,
        e2: TAU * mass,
        e3: TAU * momentum + e3_coupling * TAU * v_l2,
        h: 0.5 * TAU * kinetic + quad_v * TAU * v_half_deriv + 0.5 * params.alpha * interaction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn unit_params() -> SBOParams {
        SBOParams::new(1.0, 1.0, -2.0).unwrap()
    }

    #[test]
    fn kappa_derivation() {
        let p = unit_params();
        assert_eq!(p.kappa, 1.0);
        assert!(p.require_positive_kappa().is_ok());
        let q = SBOParams::new(1.0, 1.0, 2.0).unwrap();
        assert!(matches!(q.require_positive_kappa(), Err(Error::NonPositiveKappa(_))));
        assert!(SBOParams::new(0.0, 1.0, 1.0).is_err());
        assert!(SBOParams::new(1.0, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn rhs_single_mode() {
        let z = SpectralPair::zeros(3).unwrap();
        assert_eq!(rhs(&z, &unit_params()).unwrap().max_abs(), 0.0);

        let u = SpectralField::from_modes(3, &[(1, c(1.0, 0.0))]).unwrap();
        let s = SpectralPair::new(u, RealSpectralField::zeros(3).unwrap()).unwrap();
        let t = rhs(&s, &unit_params()).unwrap();
        assert_eq!(t.u.coeff(1), c(0.0, -1.0));
        assert_eq!(t.v.as_field().max_abs(), 0.0);
    }

    #[test]
    fn linear_flow_examples() {
        let u = SpectralField::from_modes(2, &[(1, c(1.0, 0.0))]).unwrap();
        let s = SpectralPair::new(u, RealSpectralField::zeros(2).unwrap()).unwrap();
        assert_eq!(linear_flow(&s, 0.0, 2.0), s);
        let t = linear_flow(&s, PI, 2.0);
        assert_relative_eq!(t.u.coeff(1).re, -1.0, epsilon = 1e-15);
        assert!(t.u.coeff(1).im.abs() < 1e-15);
    }

    #[test]
    fn single_mode_step_is_linear_flow() {
        let u = SpectralField::from_modes(4, &[(2, c(0.3, -0.4))]).unwrap();
        let s = SpectralPair::new(u, RealSpectralField::zeros(4).unwrap()).unwrap();
        let p = unit_params();
        let stepped = step_strang(&s, 1e-3, &p).unwrap();
        let exact = linear_flow(&s, 1e-3, p.gamma);
        assert!(stepped.max_distance(&exact).unwrap() < 1e-16);
    }

    #[test]
    fn conserved_examples() {
        let u = SpectralField::from_modes(3, &[(1, c(1.0, 0.0))]).unwrap();
        let s = SpectralPair::new(u, RealSpectralField::zeros(3).unwrap()).unwrap();
        let q = conserved_quantities(&s, &unit_params()).unwrap();
        assert_eq!(q.e1, 0.0);
        assert_relative_eq!(q.e2, TAU);
        assert_relative_eq!(q.e3, -TAU);
        assert_relative_eq!(q.h, PI);

        let v = RealSpectralField::from_positive_modes(3, &[(1, c(0.5, 0.0))]).unwrap();
        let s = SpectralPair::new(SpectralField::zeros(3).unwrap(), v).unwrap();
        let q = conserved_quantities(&s, &unit_params()).unwrap();
        assert_eq!(q.e1, 0.0);
        assert_eq!(q.e2, 0.0);
        // α/(2β) ∫ cos² = π/2
        assert_relative_eq!(q.e3, PI / 2.0, epsilon = 1e-15);
        assert_relative_eq!(q.h, PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn evolve_record_counts() {
        let u = SpectralField::from_modes(2, &[(1, c(0.5, 0.0)), (0, c(0.2, 0.1))]).unwrap();
        let v = RealSpectralField::from_positive_modes(2, &[(1, c(0.1, 0.2))]).unwrap();
        let s = SpectralPair::new(u, v).unwrap();
        let traj = evolve(&s, 10.0 * 1e-3, 1e-3, &unit_params(), 1).unwrap();
        assert_eq!(traj.len(), 11);
        assert_relative_eq!(*traj.times.last().unwrap(), 1e-2, epsilon = 1e-15);

        let traj = evolve(&s, 10.0 * 1e-3, 1e-3, &unit_params(), 3).unwrap();
        assert_eq!(traj.times.len(), 5); // 0, 3, 6, 9, 10

        let z = SpectralPair::zeros(2).unwrap();
        let traj = evolve(&z, 0.05, 1e-3, &unit_params(), 10).unwrap();
        assert!(traj.states.iter().all(|p| p.max_abs() == 0.0));
    }

    #[test]
    fn short_horizon_takes_single_shortened_step() {
        let (steps, last) = step_plan(2.5e-4, 1e-3);
        assert_eq!(steps, 1);
        assert_eq!(last, 2.5e-4);
        let (steps, last) = step_plan(1.0, 1e-3);
        assert_eq!(steps, 1000);
        assert_relative_eq!(last, 1e-3, epsilon = 1e-12);
        let (steps, last) = step_plan(0.0105, 1e-3);
        assert_eq!(steps, 11);
        assert_relative_eq!(last, 0.5e-3, epsilon = 1e-9);
    }

    #[test]
    fn rejects_bad_steps() {
        let s = SpectralPair::zeros(2).unwrap();
        assert!(step_strang(&s, 0.0, &unit_params()).is_err());
        assert!(step_strang(&s, -1e-3, &unit_params()).is_err());
        assert!(evolve(&s, -1.0, 1e-3, &unit_params(), 1).is_err());
    }

    #[test]
    fn substep_count() {
        assert_eq!(coupling_substeps(1e-3), 4);
        assert_eq!(coupling_substeps(1e-4), 4);
        assert_eq!(coupling_substeps(1e-2), 10);
    }
}

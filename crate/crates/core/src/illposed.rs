//! Second Gateaux derivative of the solution map at zero data for the
//! two-mode data families, in closed form and by finite differences through
//! the solver, and the resulting norm-inflation fits in `N`.
//!
//! With data `δ(φ, 0)` the expansion `v(t; δ) = δ² ψ₂/2 + O(δ⁴)` gives
//! `ψ̂₂(M) = 2βM N^{-2s} e^{-iωt} (e^{iQt} - 1)/Q` on the difference mode
//! `M` of the two data modes, `ω = γ|M|M`. For `Q = 0` this is
//! `ψ₂ = -4βN^{1-2s} t sin(Nx - γ|N|Nt)`.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{advance, SBOParams};
use crate::error::{Error, Result};
use crate::resonance::q_function;
use crate::spectral::{bracket, sobolev_norm, RealSpectralField, SpectralField, SpectralPair};
use crate::stats::{self, LinearFit};

pub use crate::resonance::nearest_integer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    RationalQZero,
    IrrationalQNonzero,
    GammaAbsOne,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::RationalQZero => "rational-Q-zero",
            Family::IrrationalQNonzero => "irrational-Q-nonzero",
            Family::GammaAbsOne => "gamma-abs-one",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IllposedCase {
    pub n: i64,
    pub s: f64,
    pub gamma: f64,
    pub family: Family,
    pub c_gamma: f64,
    pub d_gamma: f64,
    /// `‖c_γ N‖`
    pub c_mode: i64,
    /// `‖d_γ N‖`
    pub d_mode: i64,
    /// `Q(N, ‖c_γ N‖)`
    pub q: f64,
}

impl IllposedCase {
    pub fn new(n: i64, s: f64, gamma: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter(format!("N = {n} must be >= 1")));
        }
        if gamma == 0.0 || !gamma.is_finite() || !s.is_finite() {
            return Err(Error::InvalidParameter(format!("gamma = {gamma}, s = {s}")));
        }
        if gamma == -1.0 {
            return Err(Error::InvalidParameter(
                "gamma = -1 resonates at negative N; only the positive-N branch is built".into(),
            ));
        }
        let c_gamma = (1.0 + gamma) / 2.0;
        let d_gamma = 1.0 - c_gamma;
        if gamma == 1.0 {
            return Ok(Self {
                n,
                s,
                gamma,
                family: Family::GammaAbsOne,
                c_gamma,
                d_gamma,
                c_mode: n,
                d_mode: 0,
                q: 0.0,
            });
        }
        let c_mode = nearest_integer(c_gamma * n as f64);
        let d_mode = nearest_integer(d_gamma * n as f64);
        if c_mode + d_mode != n {
            return Err(Error::InvalidParameter(format!(
                "rounded modes {c_mode} + {d_mode} do not add up to N = {n}"
            )));
        }
        let q = q_function(n, c_mode, gamma)?;
        let family = if q == 0.0 {
            Family::RationalQZero
        } else {
            Family::IrrationalQNonzero
        };
        Ok(Self {
            n,
            s,
            gamma,
            family,
            c_gamma,
            d_gamma,
            c_mode,
            d_mode,
            q,
        })
    }

    /// Same data with a prescribed family; rejected when it contradicts `Q`.
    pub fn with_family(mut self, family: Family) -> Result<Self> {
        let ok = match family {
            Family::GammaAbsOne => self.gamma == 1.0,
            Family::RationalQZero => self.q == 0.0 && self.gamma != 1.0,
            Family::IrrationalQNonzero => self.q != 0.0,
        };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "family {} does not match Q = {} at N = {}",
                family.label(),
                self.q,
                self.n
            )));
        }
        self.family = family;
        Ok(self)
    }

    /// Data modes with their amplitudes.
    fn modes(&self) -> Vec<(i64, Complex64)> {
        let amp = Complex64::new((self.n as f64).powf(-self.s), 0.0);
        match self.family {
            Family::GammaAbsOne => vec![(self.n, amp), (0, Complex64::new(1.0, 0.0))],
            _ => vec![(self.c_mode, amp), (-self.d_mode, amp)],
        }
    }

    /// Largest `|mode|` the data and `ψ₂` occupy.
    pub fn required_n_max(&self) -> usize {
        self.modes()
            .iter()
            .map(|(k, _)| k.unsigned_abs())
            .chain([self.n.unsigned_abs()])
            .max()
            .unwrap_or(1)
            .max(1) as usize
    }
}

/// `(φ, 0)` for the case at truncation `n_max`.
pub fn illposed_data(case: &IllposedCase, n_max: usize) -> Result<SpectralPair> {
    for (k, _) in case.modes() {
        if k.unsigned_abs() as usize > n_max {
            return Err(Error::ModeOutOfRange { mode: k, n_max });
        }
    }
    let mut amps: Vec<(i64, Complex64)> = Vec::new();
    for (k, a) in case.modes() {
        match amps.iter_mut().find(|(m, _)| *m == k) {
            Some((_, b)) => *b += a,
            None => amps.push((k, a)),
        }
    }
    SpectralPair::new(
        SpectralField::from_modes(n_max, &amps)?,
        RealSpectralField::zeros(n_max)?,
    )
}

/// Coefficient `ψ̂₂(N, t)`; `ψ̂₂(-N)` is its conjugate and all other modes
/// vanish.
pub fn psi2_coefficient(case: &IllposedCase, beta: f64, t: f64) -> Result<Complex64> {
    let nf = case.n as f64;
    let omega = case.gamma * nf * nf;
    let (amp2, q) = match case.family {
        // |φ₁|² has N-th coefficient N^{-s} e^{-iN²t}.
        Family::GammaAbsOne => (nf.powf(-case.s), 0.0),
        Family::RationalQZero => (nf.powf(-2.0 * case.s), 0.0),
        Family::IrrationalQNonzero => {
            if case.q == 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "Q = 0 at N = {} on the nonresonant branch",
                    case.n
                )));
            }
            (nf.powf(-2.0 * case.s), case.q)
        }
    };
    let carrier = Complex64::from_polar(1.0, -omega * t);
    let growth = if q == 0.0 {
        Complex64::new(0.0, t)
    } else {
        (Complex64::from_polar(1.0, q * t) - 1.0) / q
    };
    Ok(2.0 * beta * nf * amp2 * carrier * growth)
}

pub fn psi2_closed_form(case: &IllposedCase, beta: f64, t: f64, n_max: usize) -> Result<RealSpectralField> {
    if (case.n as usize) > n_max {
        return Err(Error::ModeOutOfRange {
            mode: case.n,
            n_max,
        });
    }
    let c = psi2_coefficient(case, beta, t)?;
    RealSpectralField::from_positive_modes(n_max, &[(case.n, c)])
}

/// `‖ψ₂(t)‖_{H^{s-1/2}}` from the closed form.
pub fn psi2_norm(case: &IllposedCase, beta: f64, t: f64) -> Result<f64> {
    let c = psi2_coefficient(case, beta, t)?;
    Ok(SQRT_2 * bracket(case.n).powf(case.s - 0.5) * c.norm())
}

/// Central second difference `(w(t; δ) + w(t; -δ))/δ²` of the solver at zero
/// data, for both components.
pub fn second_derivative_fd(
    case: &IllposedCase,
    params: &SBOParams,
    t: f64,
    delta: f64,
    dt: f64,
    n_max: usize,
) -> Result<SpectralPair> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta = {delta}")));
    }
    let data = illposed_data(case, n_max)?;
    let (plus, minus) = rayon::join(
        || advance(&scaled(&data, delta)?, t, dt, params),
        || advance(&scaled(&data, -delta)?, t, dt, params),
    );
    let (plus, minus) = (plus?, minus?);
    let k = 1.0 / (delta * delta);
    SpectralPair::new(
        plus.u.add(&minus.u)?.scale(k),
        plus.v.add(&minus.v)?.scale(k),
    )
}

fn scaled(p: &SpectralPair, a: f64) -> Result<SpectralPair> {
    SpectralPair::new(p.u.scale(a), p.v.scale(a))
}

/// `H^s × H^{s-1/2}` norms of both components of a pair.
pub fn component_norms(p: &SpectralPair, s: f64) -> (f64, f64) {
    (sobolev_norm(&p.u, s), sobolev_norm(p.v.as_field(), s - 0.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: i64,
    pub norm: f64,
    pub family: Family,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub fit: LinearFit,
    pub rows: Vec<ScalingRow>,
    /// `N` values refused for lack of near-resonance.
    pub refused: Vec<i64>,
}

/// Largest `|Q|` accepted at irrational `γ`; convergent denominators of `c_γ`
/// satisfy `|Q| < 2`.
pub const DIRICHLET_Q_MAX: f64 = 2.0;

/// Log-log fit of `‖ψ₂(t)‖_{H^{s-1/2}}` against `N`.
pub fn scaling_fit(s: f64, gamma: f64, beta: f64, t: f64, n_list: &[i64]) -> Result<ScalingFit> {
    let evaluated = n_list
        .par_iter()
        .map(|&n| {
            let case = match IllposedCase::new(n, s, gamma) {
                Ok(c) => c,
                Err(Error::InvalidParameter(_)) => return Ok(Err(n)),
                Err(e) => return Err(e),
            };
            if case.family == Family::IrrationalQNonzero && case.q.abs() > DIRICHLET_Q_MAX {
                return Ok(Err(n));
            }
            Ok(Ok(ScalingRow {
                n,
                norm: psi2_norm(&case, beta, t)?,
                family: case.family,
                q: case.q,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut refused = Vec::new();
    for r in evaluated {
        match r {
            Ok(row) => rows.push(row),
            Err(n) => refused.push(n),
        }
    }
    let x: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.norm.ln()).collect();
    let fit = stats::linear_fit(&x, &y).ok_or_else(|| {
        Error::InsufficientData(format!("{} usable N values", rows.len()))
    })?;
    Ok(ScalingFit {
        slope: fit.slope,
        intercept: fit.intercept,
        residual: fit.residual,
        fit,
        rows,
        refused,
    })
}

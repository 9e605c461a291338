//! Truncated Fourier fields on the torus `[0, 2π)` and the operators and norms
//! acting on them.
//!
//! A field is `f(x) = Σ_{|n| <= N} c(n) e^{inx}`. Physical-space integrals keep
//! the factor `2π` (`∫ f dx = 2π c(0)`), sequence norms carry no normalisation,
//! and the weight is `⟨n⟩ = 1 + |n|`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::product::ProductEngine;

/// `⟨n⟩ = 1 + |n|`.
#[inline]
pub fn bracket(n: i64) -> f64 {
    1.0 + n.unsigned_abs() as f64
}

#[inline]
pub(crate) fn sgn(n: i64) -> f64 {
    n.signum() as f64
}

/// Complex coefficients `c(n)`, `|n| <= n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    n_max: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::InvalidNMax(n_max));
        }
        Ok(Self {
            n_max,
            coeffs: vec![Complex64::new(0.0, 0.0); 2 * n_max + 1],
        })
    }

    /// Builds a field from the centred layout `coeffs[n + n_max]`.
    pub fn from_coeffs(n_max: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::InvalidNMax(n_max));
        }
        let expected = 2 * n_max + 1;
        if coeffs.len() != expected {
            return Err(Error::CoefficientCount {
                expected,
                got: coeffs.len(),
            });
        }
        let n = n_max as i64;
        for (i, c) in coeffs.iter().enumerate() {
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::NonFinite(i as i64 - n));
            }
        }
        Ok(Self { n_max, coeffs })
    }

    /// Builds a field from a sparse list of `(mode, coefficient)` pairs.
    /// Repeated modes accumulate.
    pub fn from_modes(n_max: usize, modes: &[(i64, Complex64)]) -> Result<Self> {
        let mut f = Self::zeros(n_max)?;
        for &(k, c) in modes {
            if k.unsigned_abs() as usize > n_max {
                return Err(Error::ModeOutOfRange { mode: k, n_max });
            }
            f.coeffs[(k + n_max as i64) as usize] += c;
        }
        Self::from_coeffs(n_max, f.coeffs)
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Coefficient at mode `n`; zero outside the truncation.
    pub fn coeff(&self, n: i64) -> Complex64 {
        if n.unsigned_abs() as usize > self.n_max {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[(n + self.n_max as i64) as usize]
        }
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Iterates `(n, c(n))` in increasing `n`.
    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let n = self.n_max as i64;
        self.coeffs.iter().enumerate().map(move |(i, c)| (i as i64 - n, *c))
    }

    /// Coefficientwise multiplier `c(n) -> m(n) c(n)`.
    pub fn map_modes(&self, mut m: impl FnMut(i64, Complex64) -> Complex64) -> Self {
        let n = self.n_max as i64;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| m(i as i64 - n, *c))
            .collect();
        Self {
            n_max: self.n_max,
            coeffs,
        }
    }

    /// `x -> conj(f(-x))`, i.e. conjugation of every coefficient.
    pub fn conj_reflect(&self) -> Self {
        self.map_modes(|_, c| c.conj())
    }

    /// `x -> conj(f(x))`: coefficient `conj(c(-n))` at mode `n`.
    pub fn conjugate(&self) -> Self {
        let coeffs = self.coeffs.iter().rev().map(|c| c.conj()).collect();
        Self {
            n_max: self.n_max,
            coeffs,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_modes(|_, c| c * s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same(self.n_max, other.n_max)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Self {
            n_max: self.n_max,
            coeffs,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Values `f(x_j)` on the uniform grid `x_j = 2πj/points`.
    pub fn evaluate_grid(&self, points: usize) -> Vec<Complex64> {
        (0..points)
            .map(|j| {
                let x = TAU * j as f64 / points as f64;
                self.modes()
                    .map(|(k, c)| c * Complex64::from_polar(1.0, k as f64 * x))
                    .sum()
            })
            .collect()
    }
}

/// A real-valued field: `c(-n) = conj(c(n))` and `c(0)` real hold exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpectralField", into = "SpectralField")]
pub struct RealSpectralField(SpectralField);

impl TryFrom<SpectralField> for RealSpectralField {
    type Error = Error;

    fn try_from(f: SpectralField) -> Result<Self> {
        Self::from_field(f)
    }
}

impl From<RealSpectralField> for SpectralField {
    fn from(f: RealSpectralField) -> Self {
        f.0
    }
}

impl RealSpectralField {
    pub fn zeros(n_max: usize) -> Result<Self> {
        SpectralField::zeros(n_max).map(Self)
    }

    /// Builds the field from its non-negative modes `half[n]`, `n = 0..=n_max`.
    /// The imaginary part of `half[0]` is discarded.
    pub fn from_half(n_max: usize, half: &[Complex64]) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::InvalidNMax(n_max));
        }
        if half.len() != n_max + 1 {
            return Err(Error::CoefficientCount {
                expected: n_max + 1,
                got: half.len(),
            });
        }
        let mut coeffs = Vec::with_capacity(2 * n_max + 1);
        coeffs.extend(half[1..].iter().rev().map(|c| c.conj()));
        coeffs.push(Complex64::new(half[0].re, 0.0));
        coeffs.extend_from_slice(&half[1..]);
        SpectralField::from_coeffs(n_max, coeffs).map(Self)
    }

    /// Sparse constructor over `n >= 0`; the mirrored modes are implied.
    pub fn from_positive_modes(n_max: usize, modes: &[(i64, Complex64)]) -> Result<Self> {
        let mut half = vec![Complex64::new(0.0, 0.0); n_max + 1];
        for &(k, c) in modes {
            if k < 0 || k as usize > n_max {
                return Err(Error::ModeOutOfRange { mode: k, n_max });
            }
            half[k as usize] += c;
        }
        Self::from_half(n_max, &half)
    }

    /// Accepts a complex field only if it is exactly Hermitian.
    pub fn from_field(f: SpectralField) -> Result<Self> {
        let n = f.n_max as i64;
        if f.coeff(0).im != 0.0 {
            return Err(Error::NotHermitian(0));
        }
        for k in 1..=n {
            if f.coeff(-k) != f.coeff(k).conj() {
                return Err(Error::NotHermitian(k));
            }
        }
        Ok(Self(f))
    }

    pub fn n_max(&self) -> usize {
        self.0.n_max
    }

    pub fn coeff(&self, n: i64) -> Complex64 {
        self.0.coeff(n)
    }

    pub fn as_field(&self) -> &SpectralField {
        &self.0
    }

    /// Non-negative half `c(0), ..., c(n_max)`.
    pub fn half(&self) -> &[Complex64] {
        &self.0.coeffs[self.0.n_max..]
    }

    /// Applies an odd-or-even multiplier computed on `n >= 0` and mirrored.
    /// Hermitian symmetry is preserved when `m(-n) = conj(m(n))`, which every
    /// real-symbol operator here satisfies.
    fn map_half(&self, m: impl Fn(i64, Complex64) -> Complex64) -> Self {
        let half: Vec<Complex64> = self
            .half()
            .iter()
            .enumerate()
            .map(|(k, c)| m(k as i64, *c))
            .collect();
        Self::from_half(self.n_max(), &half).expect("multiplier keeps coefficients finite")
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_half(|_, c| c * s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same(self.n_max(), other.n_max())?;
        let half: Vec<Complex64> = self
            .half()
            .iter()
            .zip(other.half())
            .map(|(a, b)| a + b)
            .collect();
        Self::from_half(self.n_max(), &half)
    }

    /// Real values on the uniform grid.
    pub fn evaluate_grid(&self, points: usize) -> Vec<f64> {
        (0..points)
            .map(|j| {
                let x = TAU * j as f64 / points as f64;
                let mut acc = self.half()[0].re;
                for (k, c) in self.half().iter().enumerate().skip(1) {
                    acc += 2.0 * (c * Complex64::from_polar(1.0, k as f64 * x)).re;
                }
                acc
            })
            .collect()
    }
}

/// The state `(u, v)`: complex Schrödinger field and real Benjamin-Ono field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralPair {
    pub u: SpectralField,
    pub v: RealSpectralField,
}

impl SpectralPair {
    pub fn new(u: SpectralField, v: RealSpectralField) -> Result<Self> {
        check_same(u.n_max(), v.n_max())?;
        Ok(Self { u, v })
    }

    pub fn zeros(n_max: usize) -> Result<Self> {
        Ok(Self {
            u: SpectralField::zeros(n_max)?,
            v: RealSpectralField::zeros(n_max)?,
        })
    }

    pub fn n_max(&self) -> usize {
        self.u.n_max()
    }

    /// Time reversal `(u, v)(x) -> (conj u(-x), v(-x))`.
    pub fn time_reversed(&self) -> Self {
        let half: Vec<Complex64> = self.v.half().iter().map(|c| c.conj()).collect();
        Self {
            u: self.u.conj_reflect(),
            v: RealSpectralField::from_half(self.n_max(), &half).expect("finite"),
        }
    }

    /// Largest coefficient modulus over both components.
    pub fn max_abs(&self) -> f64 {
        self.u.max_abs().max(self.v.as_field().max_abs())
    }

    /// Maximum coefficient distance to another pair.
    pub fn max_distance(&self, other: &Self) -> Result<f64> {
        check_same(self.n_max(), other.n_max())?;
        let du = self.u.sub(&other.u)?.max_abs();
        let dv = self.v.as_field().sub(other.v.as_field())?.max_abs();
        Ok(du.max(dv))
    }
}

pub(crate) fn check_same(left: usize, right: usize) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(Error::MismatchedNMax { left, right })
    }
}

/// Hilbert transform, multiplier `-i sgn(n)`.
pub fn hilbert_transform(f: &RealSpectralField) -> RealSpectralField {
    f.map_half(|k, c| Complex64::new(0.0, -sgn(k)) * c)
}

/// `|∂_x|^power`, multiplier `|n|^power`; the mean is removed for `power > 0`.
pub fn apply_d(f: &SpectralField, power: f64) -> Result<SpectralField> {
    if power < 0.0 || power.is_nan() {
        return Err(Error::NegativePower(power));
    }
    Ok(f.map_modes(|k, c| {
        if k == 0 {
            if power > 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                c
            }
        } else {
            c * (k.unsigned_abs() as f64).powf(power)
        }
    }))
}

/// `|∂_x|^power` on a real field.
pub fn apply_d_real(f: &RealSpectralField, power: f64) -> Result<RealSpectralField> {
    if power < 0.0 || power.is_nan() {
        return Err(Error::NegativePower(power));
    }
    Ok(f.map_half(|k, c| {
        if k == 0 {
            if power > 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                c
            }
        } else {
            c * (k as f64).powf(power)
        }
    }))
}

/// `∂_x`, multiplier `i n`.
pub fn derivative(f: &SpectralField) -> SpectralField {
    f.map_modes(|k, c| Complex64::new(0.0, k as f64) * c)
}

pub fn derivative_real(f: &RealSpectralField) -> RealSpectralField {
    f.map_half(|k, c| Complex64::new(0.0, k as f64) * c)
}

/// `(Σ ⟨n⟩^{2s} |c(n)|²)^{1/2}`.
pub fn sobolev_norm(f: &SpectralField, s: f64) -> f64 {
    sobolev_norm_sq(f, s).sqrt()
}

pub fn sobolev_norm_sq(f: &SpectralField, s: f64) -> f64 {
    f.modes()
        .map(|(k, c)| bracket(k).powf(2.0 * s) * c.norm_sqr())
        .sum()
}

/// `sup_n ⟨n⟩^s |c(n)|`.
pub fn weighted_sup(f: &SpectralField, s: f64) -> f64 {
    f.modes()
        .map(|(k, c)| bracket(k).powf(s) * c.norm())
        .fold(0.0, f64::max)
}

/// `‖f‖_{H^{s1}} + sup_n ⟨n⟩^{s2} |c(n)|`.
pub fn modified_norm(f: &SpectralField, s1: f64, s2: f64) -> f64 {
    sobolev_norm(f, s1) + weighted_sup(f, s2)
}

/// `H^{s1,s2} × H^{s1-1/2, s2-1/2}` norm of a state.
pub fn pair_norm(p: &SpectralPair, s1: f64, s2: f64) -> f64 {
    modified_norm(&p.u, s1, s2) + modified_norm(p.v.as_field(), s1 - 0.5, s2 - 0.5)
}

/// Galerkin projection of the pointwise product, `P_N(f g)`.
pub fn convolve_truncated(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    check_same(f.n_max(), g.n_max())?;
    let mut out = vec![Complex64::new(0.0, 0.0); 2 * f.n_max() + 1];
    ProductEngine::new(f.n_max()).product(f.coeffs(), g.coeffs(), &mut out);
    SpectralField::from_coeffs(f.n_max(), out)
}

/// `P_N(f g)` for two real fields; the result is exactly Hermitian.
pub fn convolve_real(f: &RealSpectralField, g: &RealSpectralField) -> Result<RealSpectralField> {
    check_same(f.n_max(), g.n_max())?;
    let full = convolve_truncated(f.as_field(), g.as_field())?;
    RealSpectralField::from_half(f.n_max(), &full.coeffs()[f.n_max()..])
}

/// `P_N(|u|²)` as an exactly Hermitian field.
pub fn abs_square(u: &SpectralField) -> RealSpectralField {
    let mut half = vec![Complex64::new(0.0, 0.0); u.n_max() + 1];
    ProductEngine::new(u.n_max()).abs2_half(u.coeffs(), &mut half);
    RealSpectralField::from_half(u.n_max(), &half).expect("finite products")
}

/// `∫_T f dx = 2π c(0)`.
pub fn integral(f: &SpectralField) -> Complex64 {
    f.coeff(0) * TAU
}

/// `∫ v |u|² dx` for real `v`, evaluated as `2π Σ_n v(n) conj(|u|²(n))`.
pub fn interaction_integral(u: &SpectralField, v: &RealSpectralField) -> Result<f64> {
    check_same(u.n_max(), v.n_max())?;
    let w = abs_square(u);
    let h = v.half();
    let wh = w.half();
    let mut acc = h[0].re * wh[0].re;
    for k in 1..h.len() {
        acc += 2.0 * (h[k] * wh[k].conj()).re;
    }
    Ok(TAU * acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hilbert_examples() {
        let f = RealSpectralField::from_positive_modes(4, &[(2, c(1.0, 0.0))]).unwrap();
        let h = hilbert_transform(&f);
        assert_eq!(h.coeff(2), c(0.0, -1.0));
        assert_eq!(h.coeff(-2), c(0.0, 1.0));

        let k = RealSpectralField::from_positive_modes(4, &[(0, c(5.0, 0.0))]).unwrap();
        assert!(hilbert_transform(&k).half().iter().all(|z| z.norm() == 0.0));

        // sin x = (e^{ix} - e^{-ix}) / 2i  ->  -cos x
        let sin = RealSpectralField::from_positive_modes(3, &[(1, c(0.0, -0.5))]).unwrap();
        let h = hilbert_transform(&sin);
        assert_eq!(h.coeff(1), c(-0.5, 0.0));
        assert_eq!(h.coeff(-1), c(-0.5, 0.0));
    }

    #[test]
    fn d_examples() {
        let f = SpectralField::from_modes(4, &[(-3, c(1.0, 0.0))]).unwrap();
        assert_eq!(apply_d(&f, 1.0).unwrap().coeff(-3), c(3.0, 0.0));
        let g = SpectralField::from_modes(4, &[(4, c(2.0, 0.0))]).unwrap();
        assert_eq!(apply_d(&g, 0.5).unwrap().coeff(4), c(4.0, 0.0));
        let h = SpectralField::from_modes(4, &[(0, c(7.0, 1.0)), (2, c(1.0, 1.0))]).unwrap();
        assert_eq!(apply_d(&h, 0.0).unwrap(), h);
        assert!(matches!(apply_d(&h, -0.5), Err(Error::NegativePower(_))));
    }

    #[test]
    fn derivative_examples() {
        let f = SpectralField::from_modes(2, &[(1, c(1.0, 0.0))]).unwrap();
        assert_eq!(derivative(&f).coeff(1), c(0.0, 1.0));
        let k = SpectralField::from_modes(2, &[(0, c(3.0, 0.0))]).unwrap();
        assert_eq!(derivative(&k).max_abs(), 0.0);
        let cos = RealSpectralField::from_positive_modes(2, &[(1, c(0.5, 0.0))]).unwrap();
        let d = derivative_real(&cos);
        // -sin x has coefficient i/2 at n = 1
        assert_eq!(d.coeff(1), c(0.0, 0.5));
        assert_eq!(d.coeff(-1), c(0.0, -0.5));
    }

    #[test]
    fn norm_examples() {
        let e3 = SpectralField::from_modes(4, &[(3, c(1.0, 0.0))]).unwrap();
        assert_relative_eq!(sobolev_norm(&e3, 0.5), 2.0, epsilon = 1e-15);
        let one = SpectralField::from_modes(4, &[(0, c(1.0, 0.0))]).unwrap();
        assert_relative_eq!(sobolev_norm(&one, 3.7), 1.0);
        let two_cos = SpectralField::from_modes(4, &[(1, c(1.0, 0.0)), (-1, c(1.0, 0.0))]).unwrap();
        assert_relative_eq!(sobolev_norm(&two_cos, 1.0), 8f64.sqrt(), epsilon = 1e-15);

        assert_relative_eq!(modified_norm(&e3, 0.5, 1.0), 6.0, epsilon = 1e-15);
        assert_eq!(modified_norm(&SpectralField::zeros(3).unwrap(), 0.3, 0.7), 0.0);

        let p = SpectralPair::new(
            SpectralField::from_modes(2, &[(1, c(1.0, 0.0))]).unwrap(),
            RealSpectralField::zeros(2).unwrap(),
        )
        .unwrap();
        assert_relative_eq!(pair_norm(&p, 0.5, 1.0), 2f64.sqrt() + 2.0, epsilon = 1e-15);
        assert_eq!(pair_norm(&SpectralPair::zeros(2).unwrap(), 0.5, 1.0), 0.0);

        // v-only: shifted regularities
        let v = RealSpectralField::from_positive_modes(4, &[(3, c(1.0, 0.0))]).unwrap();
        let p = SpectralPair::new(SpectralField::zeros(4).unwrap(), v.clone()).unwrap();
        assert_relative_eq!(
            pair_norm(&p, 0.4, 0.8),
            modified_norm(v.as_field(), -0.1, 0.3),
            epsilon = 1e-15
        );
    }

    #[test]
    fn convolution_examples() {
        let a = SpectralField::from_modes(4, &[(2, c(1.0, 0.0))]).unwrap();
        let b = SpectralField::from_modes(4, &[(3, c(1.0, 0.0))]).unwrap();
        assert_eq!(convolve_truncated(&a, &b).unwrap().max_abs(), 0.0);

        let a = SpectralField::from_modes(8, &[(2, c(1.0, 0.0))]).unwrap();
        let b = SpectralField::from_modes(8, &[(3, c(1.0, 0.0))]).unwrap();
        let p = convolve_truncated(&a, &b).unwrap();
        assert_eq!(p.coeff(5), c(1.0, 0.0));
        assert_eq!(p.modes().filter(|(_, z)| z.norm() != 0.0).count(), 1);

        let mismatched = SpectralField::zeros(4).unwrap();
        assert!(matches!(
            convolve_truncated(&a, &mismatched),
            Err(Error::MismatchedNMax { .. })
        ));
    }

    #[test]
    fn integral_examples() {
        let one = SpectralField::from_modes(3, &[(0, c(1.0, 0.0))]).unwrap();
        assert_relative_eq!(integral(&one).re, TAU);
        let e1 = SpectralField::from_modes(3, &[(1, c(1.0, 0.0))]).unwrap();
        assert_eq!(integral(&e1), c(0.0, 0.0));
        let f = SpectralField::from_modes(3, &[(0, c(3.0, 0.0)), (1, c(0.5, 0.0)), (-1, c(0.5, 0.0))])
            .unwrap();
        assert_relative_eq!(integral(&f).re, 6.0 * std::f64::consts::PI, epsilon = 1e-15);
    }

    #[test]
    fn rejects_invalid_fields() {
        assert!(matches!(SpectralField::zeros(0), Err(Error::InvalidNMax(0))));
        assert!(matches!(
            SpectralField::from_coeffs(1, vec![c(0.0, 0.0); 2]),
            Err(Error::CoefficientCount { .. })
        ));
        assert!(matches!(
            SpectralField::from_coeffs(1, vec![c(0.0, 0.0), c(f64::NAN, 0.0), c(0.0, 0.0)]),
            Err(Error::NonFinite(0))
        ));
        let skew = SpectralField::from_modes(2, &[(1, c(1.0, 0.0))]).unwrap();
        assert!(matches!(RealSpectralField::from_field(skew), Err(Error::NotHermitian(1))));
        let imag_mean = SpectralField::from_modes(2, &[(0, c(1.0, 1.0))]).unwrap();
        assert!(matches!(RealSpectralField::from_field(imag_mean), Err(Error::NotHermitian(0))));
        assert!(SpectralField::from_modes(2, &[(3, c(1.0, 0.0))]).is_err());
    }

    #[test]
    fn interaction_integral_cos() {
        // ∫ cos x (2 + 2 cos x) dx = 2π
        let u = SpectralField::from_modes(3, &[(0, c(1.0, 0.0)), (1, c(1.0, 0.0))]).unwrap();
        let v = RealSpectralField::from_positive_modes(3, &[(1, c(0.5, 0.0))]).unwrap();
        assert_relative_eq!(interaction_integral(&u, &v).unwrap(), TAU, epsilon = 1e-14);
    }
}

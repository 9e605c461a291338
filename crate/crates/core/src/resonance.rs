//! Resonance arithmetic: `R_n(n2)`, `Q(n, n1)`, the near-resonant set, lattice
//! scans of the bilinear multiplier, and continued-fraction search for
//! near-resonant `N` at irrational `γ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{bracket, sgn};

/// `(γ sgn(n2) + 1) n2 - 2n`.
pub fn resonance_function(n: i64, n2: i64, gamma: f64) -> f64 {
    (gamma * sgn(n2) + 1.0) * n2 as f64 - 2.0 * n as f64
}

/// `γ|n|n - n1² + n2²` with `n2 = n - n1`, cross-checked against
/// `n((1 + γ sgn(n))n - 2n1)`.
pub fn q_function(n: i64, n1: i64, gamma: f64) -> Result<f64> {
    let n2 = n - n1;
    let nf = n as f64;
    let expanded = gamma * nf.abs() * nf - (n1 * n1) as f64 + (n2 * n2) as f64;
    let factored = nf * ((1.0 + gamma * sgn(n)) * nf - 2.0 * n1 as f64);
    let scale = expanded.abs().max(factored.abs()).max(1.0);
    if (expanded - factored).abs() > 1e-9 * scale {
        return Err(Error::Defect(format!(
            "Q({n}, {n1}) forms disagree: {expanded} vs {factored}"
        )));
    }
    Ok(factored)
}

/// Centre `2n/(1 + γ sgn(n2))` of the resonant window on the branch of
/// `n2`; `None` on the degenerate branch `1 + γ sgn(n2) = 0`.
pub fn resonance_centre(n: i64, n2: i64, gamma: f64) -> Option<f64> {
    let d = 1.0 + gamma * sgn(n2);
    (d != 0.0).then(|| 2.0 * n as f64 / d)
}

/// Membership in `A = {|n2 - 2n/(1+γ sgn n2)| >= 1}`. The degenerate branch
/// has no resonance and lies in `A`.
pub fn in_a(n: i64, n2: i64, gamma: f64) -> bool {
    match resonance_centre(n, n2, gamma) {
        None => true,
        Some(c) => (n2 as f64 - c).abs() >= 1.0,
    }
}

fn on_boundary(n: i64, n2: i64, gamma: f64) -> bool {
    resonance_centre(n, n2, gamma).is_some_and(|c| (n2 as f64 - c).abs() == 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceRecord {
    pub n: i64,
    pub n1: i64,
    pub n2: i64,
    pub r: f64,
    pub q: f64,
    pub in_a: bool,
    /// `|n2 - 2n/(1+γ sgn n2)| = 1` exactly.
    pub boundary: bool,
}

impl ResonanceRecord {
    fn new(n: i64, n2: i64, gamma: f64) -> Result<Self> {
        let n1 = n - n2;
        Ok(Self {
            n,
            n1,
            n2,
            r: resonance_function(n, n2, gamma),
            q: q_function(n, n1, gamma)?,
            in_a: in_a(n, n2, gamma),
            boundary: on_boundary(n, n2, gamma),
        })
    }
}

/// Near-resonant triples and boundary triples for a single `n`.
pub fn resonant_triples(n: i64, n_cap: i64, gamma: f64) -> Result<Vec<ResonanceRecord>> {
    let mut out = Vec::new();
    let mut push = |n2: i64| -> Result<()> {
        let n1 = n - n2;
        if n2.abs() > n_cap || n1.abs() > n_cap {
            return Ok(());
        }
        if out.iter().any(|r: &ResonanceRecord| r.n2 == n2) {
            return Ok(());
        }
        if !in_a(n, n2, gamma) || on_boundary(n, n2, gamma) {
            out.push(ResonanceRecord::new(n, n2, gamma)?);
        }
        Ok(())
    };
    push(0)?;
    for branch in [1i64, -1] {
        let Some(c) = resonance_centre(n, branch, gamma) else {
            continue;
        };
        if !c.is_finite() {
            continue;
        }
        let lo = (c.floor() as i64) - 1;
        for n2 in lo..=lo + 3 {
            if sgn(n2) == branch as f64 {
                push(n2)?;
            }
        }
    }
    out.sort_by_key(|r| r.n2);
    Ok(out)
}

/// All triples with `|n|, |n1|, |n2| <= n_cap` in `A^c`, plus the boundary
/// triples of `A` (flagged `boundary`).
pub fn resonant_set(n_cap: i64, gamma: f64) -> Result<Vec<ResonanceRecord>> {
    if n_cap < 1 {
        return Err(Error::InvalidParameter(format!("n_cap = {n_cap}")));
    }
    if gamma == 0.0 || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma = {gamma}")));
    }
    let per_n = (-n_cap..=n_cap)
        .into_par_iter()
        .map(|n| resonant_triples(n, n_cap, gamma))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_n.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    A,
    AComplement,
}

impl Region {
    pub fn contains(self, n: i64, n2: i64, gamma: f64) -> bool {
        match self {
            Region::A => in_a(n, n2, gamma),
            Region::AComplement => !in_a(n, n2, gamma),
        }
    }
}

/// `⟨n⟩^s / (⟨n1⟩^s ⟨n2⟩^{s-1/2} (1 + |n2||R_n(n2)|)^b)`.
pub fn multiplier(n: i64, n2: i64, s: f64, gamma: f64, b: f64) -> f64 {
    let n1 = n - n2;
    let r = resonance_function(n, n2, gamma).abs();
    bracket(n).powf(s)
        / (bracket(n1).powf(s) * bracket(n2).powf(s - 0.5) * (1.0 + n2.unsigned_abs() as f64 * r).powf(b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSup {
    pub value: f64,
    pub n: i64,
    pub n1: i64,
    pub n2: i64,
}

/// Supremum of [`multiplier`] over the region inside `|n|, |n1|, |n2| <= cap`.
/// Ties keep the first triple in `(n, n2)` lexicographic order.
pub fn multiplier_sup(s: f64, gamma: f64, cap: i64, region: Region, b: f64) -> Result<MultiplierSup> {
    if cap < 2 {
        return Err(Error::InvalidParameter(format!("lattice cap {cap} < 2")));
    }
    let best = (-cap..=cap)
        .into_par_iter()
        .map(|n| {
            let mut best: Option<MultiplierSup> = None;
            let lo = (-cap).max(n - cap);
            let hi = cap.min(n + cap);
            for n2 in lo..=hi {
                if !region.contains(n, n2, gamma) {
                    continue;
                }
                let m = multiplier(n, n2, s, gamma, b);
                if best.is_none_or(|x| m > x.value) {
                    best = Some(MultiplierSup {
                        value: m,
                        n,
                        n1: n - n2,
                        n2,
                    });
                }
            }
            best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<MultiplierSup>, x| match acc {
            Some(a) if a.value >= x.value => Some(a),
            _ => Some(x),
        });
    best.ok_or_else(|| Error::InsufficientData("region is empty on this lattice".into()))
}

/// `‖ρ‖`: the closest integer, with `ρ - floor(ρ) = 1/2` rounded down to
/// `floor(ρ)`.
pub fn nearest_integer(rho: f64) -> i64 {
    let k = rho.floor();
    if rho - k > 0.5 {
        k as i64 + 1
    } else {
        k as i64
    }
}

/// Exact rational `num/den` with `den > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    pub num: i128,
    pub den: i128,
}

impl Rational {
    /// The exact value of a finite double.
    pub fn from_f64(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::InvalidParameter(format!("{x} is not finite")));
        }
        if x == 0.0 {
            return Ok(Self { num: 0, den: 1 });
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1i128 } else { 1 };
        let exp = ((bits >> 52) & 0x7ff) as i32;
        let frac = (bits & ((1u64 << 52) - 1)) as i128;
        let (mant, e) = if exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1i128 << 52), exp - 1075)
        };
        let r = if e >= 0 {
            if e > 70 {
                return Err(Error::InvalidParameter(format!("{x} too large for exact arithmetic")));
            }
            Self {
                num: mant << e,
                den: 1,
            }
        } else {
            let shift = -e;
            let tz = mant.trailing_zeros().min(shift as u32) as i32;
            let shift = shift - tz;
            if shift > 120 {
                return Err(Error::InvalidParameter(format!("{x} too small for exact arithmetic")));
            }
            Self {
                num: mant >> tz,
                den: 1i128 << shift,
            }
        };
        Ok(Self {
            num: sign * r.num,
            den: r.den,
        })
    }

    fn reduced(num: i128, den: i128) -> Self {
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i128;
        let s = if den < 0 { -1 } else { 1 };
        Self {
            num: s * num / g,
            den: s * den / g,
        }
    }

    /// `(1 + x)/2`.
    pub fn one_plus_half(self) -> Self {
        Self::reduced(self.num + self.den, 2 * self.den)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `‖self · n‖` under the rounding of [`nearest_integer`], and the exact
    /// distance `|self·n - ‖self·n‖|` as a rational.
    pub fn nearest_multiple(self, n: i64) -> (i64, Self) {
        let p = self.num * n as i128;
        let k = p.div_euclid(self.den);
        let r = p.rem_euclid(self.den);
        if 2 * r > self.den {
            (k as i64 + 1, Self::reduced(self.den - r, self.den))
        } else {
            (k as i64, Self::reduced(r, self.den))
        }
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Continued-fraction convergents `p/q` of `x` with `q <= q_cap`, and whether
/// the expansion terminated inside that range.
pub fn convergents(x: Rational, q_cap: i128) -> (Vec<(i128, i128)>, bool) {
    let (mut num, mut den) = (x.num, x.den);
    let (mut p0, mut q0, mut p1, mut q1) = (0i128, 1i128, 1i128, 0i128);
    let mut out = Vec::new();
    loop {
        let a = num.div_euclid(den);
        let rem = num.rem_euclid(den);
        let p = a * p1 + p0;
        let q = a * q1 + q0;
        if q > q_cap {
            return (out, false);
        }
        out.push((p, q));
        if rem == 0 {
            return (out, true);
        }
        (p0, q0, p1, q1) = (p1, q1, p, q);
        (num, den) = (den, rem);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirichletCandidate {
    pub n: i64,
    /// `‖c_γ N‖`
    pub n1: i64,
    /// `|Q(N, ‖c_γ N‖)| = 2N |c_γ N - ‖c_γ N‖|`
    pub q_abs: f64,
    /// Minimum of `|Q(N, n1)|` over the exhaustive `n1` scan.
    pub scan_min: f64,
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletReport {
    pub gamma: f64,
    pub c_gamma: f64,
    pub candidates: Vec<DirichletCandidate>,
    /// Set when the expansion of `c_γ` terminates below the cap: `γ` is
    /// rational at this resolution.
    pub rational_denominator: Option<i64>,
}

/// Convergent denominators of `c_γ = (1+γ)/2` up to `n_cap`, with `|Q|`
/// evaluated exactly on the double `γ` and checked against a scan over all
/// `|n1| <= |c_γ|N + 2`.
pub fn dirichlet_search(gamma: f64, n_cap: i64) -> Result<DirichletReport> {
    if gamma.abs() == 1.0 {
        return Err(Error::InvalidParameter("|gamma| = 1 has Q(N, N) = 0 identically".into()));
    }
    if n_cap < 2 {
        return Err(Error::InvalidParameter(format!("n_cap = {n_cap}")));
    }
    let c = Rational::from_f64(gamma)?.one_plus_half();
    let (conv, terminated) = convergents(c, n_cap as i128);
    let rational_denominator = if terminated {
        conv.last().map(|&(_, q)| q as i64)
    } else {
        None
    };
    let candidates = conv
        .par_iter()
        .filter(|&&(_, q)| q >= 1)
        .map(|&(_, q)| {
            let n = q as i64;
            let (n1, _) = c.nearest_multiple(n);
            // |c N - m| · den, exactly.
            let gap = |m: i64| (c.num * n as i128 - m as i128 * c.den).unsigned_abs();
            let to_q = |g: u128| 2.0 * n as f64 * (g as f64 / c.den as f64);
            let reach = (c.to_f64().abs() * n as f64).ceil() as i64 + 2;
            let best = (-reach..=reach).map(gap).min().expect("nonempty scan");
            DirichletCandidate {
                n,
                n1,
                q_abs: to_q(gap(n1)),
                scan_min: to_q(best),
                verified: best == gap(n1),
            }
        })
        .collect();
    Ok(DirichletReport {
        gamma,
        c_gamma: c.to_f64(),
        candidates,
        rational_denominator,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resonance_examples() {
        assert_eq!(resonance_function(3, 2, 2.0), 0.0);
        assert_eq!(resonance_function(3, -1, 2.0), -5.0);
        assert_eq!(resonance_function(7, 0, 2.0), -14.0);
    }

    #[test]
    fn q_examples() {
        assert_eq!(q_function(5, 5, 1.0).unwrap(), 0.0);
        assert_eq!(q_function(2, 3, 2.0).unwrap(), 0.0);
        assert_eq!(q_function(1, 0, 2.0).unwrap(), 3.0);
    }

    #[test]
    fn resonant_window_gamma_two() {
        let recs = resonant_triples(3, 100, 2.0).unwrap();
        let inside: Vec<i64> = recs.iter().filter(|r| !r.in_a).map(|r| r.n2).collect();
        let boundary: Vec<i64> = recs.iter().filter(|r| r.boundary).map(|r| r.n2).collect();
        assert_eq!(inside, vec![-6, 2]);
        assert_eq!(boundary, vec![-7, -5, 1, 3]);
        for r in &recs {
            assert_eq!(r.n, r.n1 + r.n2);
        }
    }

    #[test]
    fn degenerate_branch_is_in_a() {
        for n2 in -5..0 {
            assert!(in_a(4, n2, 1.0));
            assert_eq!(resonance_function(4, n2, 1.0), -8.0);
        }
    }

    #[test]
    fn nearest_integer_rule() {
        assert_eq!(nearest_integer(2.4), 2);
        assert_eq!(nearest_integer(2.5), 2);
        assert_eq!(nearest_integer(2.6), 3);
        assert_eq!(nearest_integer(-1.5), -2);
        assert_eq!(nearest_integer(-1.4), -1);
        assert_eq!(nearest_integer(3.0), 3);
    }

    #[test]
    fn exact_rationals() {
        let r = Rational::from_f64(0.375).unwrap();
        assert_eq!((r.num, r.den), (3, 8));
        let r = Rational::from_f64(-3.0).unwrap();
        assert_eq!((r.num, r.den), (-3, 1));
        let c = Rational::from_f64(2.0).unwrap().one_plus_half();
        assert_eq!((c.num, c.den), (3, 2));
        assert_eq!(c.nearest_multiple(1), (1, Rational { num: 1, den: 2 }));
        let x = Rational::from_f64(0.1).unwrap();
        assert_eq!(x.to_f64(), 0.1);
    }

    #[test]
    fn rational_gamma_terminates() {
        let rep = dirichlet_search(2.0, 1000).unwrap();
        assert_eq!(rep.rational_denominator, Some(2));
        assert_eq!(rep.candidates.last().unwrap().q_abs, 0.0);
        assert!(dirichlet_search(1.0, 10).is_err());
    }
}

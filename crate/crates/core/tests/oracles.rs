//! Independent oracles for the spectral, dynamical and resonance layers.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sbo_core::dynamics::{advance, conserved_quantities, evolve, rhs, step_strang};
use sbo_core::product::{direct_product, ProductEngine};
use sbo_core::resonance::{in_a, multiplier_sup, q_function, resonance_function, resonant_set, Region};
use sbo_core::spectral::{convolve_truncated, modified_norm, sobolev_norm, weighted_sup};
use sbo_core::{RealSpectralField, SBOParams, SpectralField, SpectralPair};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_field(n: usize, rng: &mut ChaCha8Rng) -> SpectralField {
    let coeffs = (0..2 * n + 1)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    SpectralField::from_coeffs(n, coeffs).unwrap()
}

fn random_real(n: usize, rng: &mut ChaCha8Rng) -> RealSpectralField {
    let mut half: Vec<Complex64> = (0..=n)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    half[0].im = 0.0;
    RealSpectralField::from_half(n, &half).unwrap()
}

/// Random pair with unit `ℓ²` norm.
fn random_pair(n: usize, rng: &mut ChaCha8Rng) -> SpectralPair {
    let u = random_field(n, rng);
    let v = random_real(n, rng);
    let norm = (sobolev_norm(&u, 0.0).powi(2) + sobolev_norm(v.as_field(), 0.0).powi(2)).sqrt();
    SpectralPair::new(u.scale(1.0 / norm), v.scale(1.0 / norm)).unwrap()
}

/// Convolution through a map of modes, without any truncated index arithmetic.
fn map_convolution(f: &SpectralField, g: &SpectralField) -> BTreeMap<i64, Complex64> {
    let mut out = BTreeMap::new();
    for (a, x) in f.modes() {
        for (b, y) in g.modes() {
            *out.entry(a + b).or_insert(c(0.0, 0.0)) += x * y;
        }
    }
    out
}

#[test]
fn convolution_matches_mode_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 16;
    let f = random_field(n, &mut rng);
    let g = random_field(n, &mut rng);
    let h = convolve_truncated(&f, &g).unwrap();
    let oracle = map_convolution(&f, &g);
    for (k, z) in h.modes() {
        let want = oracle[&k];
        assert!((z - want).norm() <= 1e-13 * want.norm().max(1.0), "mode {k}");
    }
}

#[test]
fn transform_products_agree_with_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in [8usize, 65, 100] {
        let f = random_field(n, &mut rng);
        let g = random_field(n, &mut rng);
        let mut direct = vec![c(0.0, 0.0); 2 * n + 1];
        direct_product(n, f.coeffs(), g.coeffs(), &mut direct);
        let mut fast = vec![c(0.0, 0.0); 2 * n + 1];
        let mut engine = ProductEngine::with_transform(n);
        engine.product(f.coeffs(), g.coeffs(), &mut fast);
        let scale = direct.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (a, b) in direct.iter().zip(&fast) {
            assert!((a - b).norm() <= 1e-13 * scale, "n_max = {n}");
        }
        assert_eq!(ProductEngine::new(n).uses_transform(), n > 64);
    }
}

#[test]
fn rhs_matches_hand_expanded_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 4usize;
    let p = random_pair(n, &mut rng);
    let params = SBOParams::new(0.7, -1.3, 2.5).unwrap();
    let t = rhs(&p, &params).unwrap();
    let ni = n as i64;
    for k in -ni..=ni {
        // Σ_{m} v(k - m) u(m)
        let mut vu = c(0.0, 0.0);
        let mut uu = c(0.0, 0.0);
        for m in -ni..=ni {
            vu += p.v.coeff(k - m) * p.u.coeff(m);
            uu += p.u.coeff(m + k) * p.u.coeff(m).conj();
        }
        let kf = k as f64;
        let du = c(0.0, -kf * kf) * p.u.coeff(k) + c(0.0, -params.alpha) * vu;
        let dv = c(0.0, -params.gamma * kf.signum() * kf * kf) * p.v.coeff(k) + c(0.0, params.beta * kf) * uu;
        assert!((t.u.coeff(k) - du).norm() < 1e-13, "u mode {k}");
        assert!((t.v.coeff(k) - dv).norm() < 1e-13, "v mode {k}");
    }
}

#[test]
fn conserved_quantities_match_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 8usize;
    let p = random_pair(n, &mut rng);
    let params = SBOParams::new(1.0, 1.0, -2.0).unwrap();
    let q = conserved_quantities(&p, &params).unwrap();
    // A 4N grid integrates products of two band-limited fields exactly, and
    // the cubic term exactly as long as 3N < 4N.
    let m = 4 * n;
    let u = p.u.evaluate_grid(m);
    let ux = sbo_core::spectral::derivative(&p.u).evaluate_grid(m);
    let v = p.v.evaluate_grid(m);
    let dhalf = sbo_core::spectral::apply_d_real(&p.v, 0.5).unwrap().evaluate_grid(m);
    let w = TAU / m as f64;
    let mut e2 = 0.0;
    let mut mom = 0.0;
    let mut v2 = 0.0;
    let mut kin = 0.0;
    let mut dv2 = 0.0;
    let mut inter = 0.0;
    for j in 0..m {
        e2 += w * u[j].norm_sqr();
        mom += w * (u[j] * ux[j].conj()).im;
        v2 += w * v[j] * v[j];
        kin += w * ux[j].norm_sqr();
        dv2 += w * dhalf[j] * dhalf[j];
        inter += w * v[j] * u[j].norm_sqr();
    }
    let e3 = mom + params.alpha / (2.0 * params.beta) * v2;
    let h = 0.5 * kin + 0.5 * params.kappa * dv2 + 0.5 * params.alpha * inter;
    assert!((q.e2 - e2).abs() < 1e-10 * e2);
    assert!((q.e3 - e3).abs() < 1e-10 * e3.abs().max(1.0));
    assert!((q.h - h).abs() < 1e-10 * h.abs().max(1.0));
    assert!((q.e1 - TAU * v.iter().sum::<f64>() / m as f64).abs() < 1e-12);
}

fn drifts(p: &SpectralPair, params: &SBOParams, dt: f64) -> [f64; 4] {
    let a = conserved_quantities(p, params).unwrap();
    let q = advance(p, 1.0, dt, params).unwrap();
    let b = conserved_quantities(&q, params).unwrap();
    [
        (b.e1 - a.e1).abs(),
        (b.e2 - a.e2).abs() / a.e2,
        (b.e3 - a.e3).abs() / a.e3.abs(),
        (b.h - a.h).abs() / a.h.abs(),
    ]
}

#[test]
fn hamiltonian_drift_is_second_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = random_pair(8, &mut rng);
    let params = SBOParams::new(1.0, 1.0, -2.0).unwrap();
    let coarse = drifts(&p, &params, 4e-3);
    let fine = drifts(&p, &params, 2e-3);
    assert!(coarse[0] <= 1e-13 && fine[0] <= 1e-13);
    assert!(fine[1] <= 1e-10);
    let ratio = coarse[3] / fine[3];
    assert!((2.8..=5.2).contains(&ratio), "H drift ratio {ratio}");
}

#[test]
fn richardson_self_convergence() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let p = random_pair(8, &mut rng);
    let params = SBOParams::new(1.0, 1.0, -2.0).unwrap();
    let t = 0.5;
    let reference = advance(&p, t, 2.5e-4, &params).unwrap();
    let e1 = advance(&p, t, 4e-3, &params).unwrap().max_distance(&reference).unwrap();
    let e2 = advance(&p, t, 2e-3, &params).unwrap().max_distance(&reference).unwrap();
    let ratio = e1 / e2;
    assert!((3.2..=4.8).contains(&ratio), "error ratio {ratio}");
}

#[test]
fn time_reversal_returns_initial_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = random_pair(8, &mut rng);
    let params = SBOParams::new(1.0, 1.0, -2.0).unwrap();
    let forward = advance(&p, 1.0, 1e-3, &params).unwrap();
    let back = advance(&forward.time_reversed(), 1.0, 1e-3, &params).unwrap().time_reversed();
    assert!(back.max_distance(&p).unwrap() < 1e-6);
}

#[test]
fn hermitian_symmetry_survives_the_flow() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = random_pair(6, &mut rng);
    let params = SBOParams::new(1.0, 1.0, -2.0).unwrap();
    let traj = evolve(&p, 0.2, 1e-2, &params, 5).unwrap();
    for s in traj.states.iter().chain([&step_strang(&p, 1e-2, &params).unwrap()]) {
        assert!(RealSpectralField::from_field(s.v.as_field().clone()).is_ok());
    }
    let t = rhs(&p, &params).unwrap();
    assert!(RealSpectralField::from_field(t.v.as_field().clone()).is_ok());
}

#[test]
fn zero_state_stays_zero() {
    let z = SpectralPair::zeros(5).unwrap();
    let params = SBOParams::new(1.0, 1.0, -2.0).unwrap();
    let traj = evolve(&z, 10.0 * 1e-2, 1e-2, &params, 1).unwrap();
    assert_eq!(traj.len(), 11);
    assert!(traj.states.iter().all(|s| s.max_abs() == 0.0));
}

#[test]
fn modified_norm_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let f = random_field(10, &mut rng);
    let (s1, s2) = (0.4, 0.7);
    let mut sum = 0.0;
    let mut sup: f64 = 0.0;
    for n in -10i64..=10 {
        let w = 1.0 + n.abs() as f64;
        sum += w.powf(2.0 * s1) * f.coeff(n).norm_sqr();
        sup = sup.max(w.powf(s2) * f.coeff(n).norm());
    }
    assert!((modified_norm(&f, s1, s2) - (sum.sqrt() + sup)).abs() < 1e-13);
    assert!((weighted_sup(&f, s2) - sup).abs() < 1e-14);
}

#[test]
fn q_substitution_identity_on_lattice() {
    for gamma in [2.0, -3.5, 2f64.sqrt(), 1.0] {
        for n in -32i64..32 {
            for n1 in -32i64..32 {
                let n2 = n - n1;
                let q = q_function(n2, n, gamma).unwrap();
                let r = resonance_function(n, n2, gamma);
                assert!((q - n2 as f64 * r).abs() <= 1e-9 * q.abs().max(1.0));
                if n2 != 0 {
                    assert_eq!(q.abs() < 1e-9, r.abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn resonant_set_matches_exhaustive_scan() {
    let gamma = 2f64.sqrt();
    let cap = 256i64;
    let set = resonant_set(cap, gamma).unwrap();
    let mut per_n: BTreeMap<i64, usize> = BTreeMap::new();
    for r in set.iter().filter(|r| !r.in_a) {
        *per_n.entry(r.n).or_default() += 1;
    }
    for n in -cap..=cap {
        let brute = (-cap..=cap)
            .filter(|&n2| (n - n2).abs() <= cap && !in_a(n, n2, gamma))
            .count();
        assert_eq!(per_n.get(&n).copied().unwrap_or(0), brute, "n = {n}");
        assert!(brute <= 4);
    }
}

#[test]
fn large_gamma_resonances_sit_next_to_zero() {
    let set = resonant_set(100, 1e6).unwrap();
    for r in set.iter().filter(|r| !r.in_a && r.n >= 1) {
        assert!(r.n2.abs() <= 1, "{r:?}");
    }
}

#[test]
fn near_resonant_frequencies_are_comparable() {
    for gamma in [2.0, 2f64.sqrt(), -3.0, 0.5] {
        let set = resonant_set(200, gamma).unwrap();
        let ratio_over = |min_n: i64| {
            set.iter()
                .filter(|r| !r.in_a && r.n.abs() >= min_n)
                .map(|r| {
                    let mags = [r.n.abs(), r.n1.abs(), r.n2.abs()];
                    let lo = *mags.iter().min().unwrap() as f64;
                    let hi = *mags.iter().max().unwrap() as f64;
                    hi / lo.max(1.0)
                })
                .fold(1.0, f64::max)
        };
        // C(γ) = max ratio of 1, |c_γ|, |d_γ| on either branch, plus rounding slack.
        let bound = [1.0 + gamma, 1.0 - gamma]
            .iter()
            .map(|d: &f64| {
                let c2 = 2.0 / d.abs();
                let c1 = (1.0 - 2.0 / d).abs();
                let m = [1.0, c1, c2];
                m.iter().cloned().fold(0.0, f64::max) / m.iter().cloned().fold(f64::MAX, f64::min)
            })
            .fold(0.0, f64::max);
        // The unit window around the resonance widens the ratio at small |n|.
        let near = ratio_over(10);
        let far = ratio_over(100);
        assert!(near <= 2.0 * bound, "gamma {gamma}: ratio {near}, bound {bound}");
        assert!(far <= 1.1 * bound, "gamma {gamma}: ratio {far}, bound {bound}");
    }
}

#[test]
fn multiplier_on_a_decreases_in_s() {
    let mut prev = f64::INFINITY;
    for s in [0.0, 0.1, 0.25, 0.45] {
        let m = multiplier_sup(s, 2.0, 64, Region::A, 0.5).unwrap().value;
        assert!(m <= prev + 1e-12);
        prev = m;
    }
}

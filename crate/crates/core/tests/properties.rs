use num_complex::Complex64;
use proptest::prelude::*;

use sbo_core::dynamics::{linear_flow, rhs, step_strang};
use sbo_core::resonance::q_function;
use sbo_core::spectral::{
    apply_d_real, convolve_real, convolve_truncated, derivative_real, hilbert_transform, integral,
    sobolev_norm,
};
use sbo_core::{RealSpectralField, SBOParams, SpectralField, SpectralPair};

fn field(n: usize) -> impl Strategy<Value = SpectralField> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2 * n + 1).prop_map(move |v| {
        SpectralField::from_coeffs(n, v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()).unwrap()
    })
}

fn real_field(n: usize) -> impl Strategy<Value = RealSpectralField> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n + 1).prop_map(move |v| {
        let half: Vec<Complex64> = v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
        RealSpectralField::from_half(n, &half).unwrap()
    })
}

fn close(a: &SpectralField, b: &SpectralField, tol: f64) -> bool {
    a.sub(b).unwrap().max_abs() <= tol
}

fn hermitian(f: &SpectralField) -> bool {
    RealSpectralField::from_field(f.clone()).is_ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hilbert_squared_removes_mean(f in real_field(9)) {
        let h2 = hilbert_transform(&hilbert_transform(&f));
        for n in -9i64..=9 {
            let want = if n == 0 { Complex64::new(0.0, 0.0) } else { -f.coeff(n) };
            prop_assert_eq!(h2.coeff(n), want);
        }
        prop_assert!(hermitian(h2.as_field()));
    }

    #[test]
    fn d_is_hilbert_of_derivative(f in real_field(9)) {
        let d = apply_d_real(&f, 1.0).unwrap();
        let hd = hilbert_transform(&derivative_real(&f));
        prop_assert_eq!(d.as_field(), hd.as_field());
        prop_assert!(hermitian(d.as_field()) && hermitian(derivative_real(&f).as_field()));
    }

    #[test]
    fn convolution_bilinear_commutative(f in field(6), g in field(6), h in field(6), a in -2.0f64..2.0) {
        let fg = convolve_truncated(&f, &g).unwrap();
        let gf = convolve_truncated(&g, &f).unwrap();
        prop_assert!(close(&fg, &gf, 1e-14));
        let lhs = convolve_truncated(&f.scale(a).add(&h).unwrap(), &g).unwrap();
        let rhs_ = fg.scale(a).add(&convolve_truncated(&h, &g).unwrap()).unwrap();
        prop_assert!(close(&lhs, &rhs_, 1e-13));
        let one = SpectralField::from_modes(6, &[(0, Complex64::new(1.0, 0.0))]).unwrap();
        prop_assert_eq!(convolve_truncated(&f, &one).unwrap(), f.clone());
    }

    #[test]
    fn real_products_stay_hermitian(f in real_field(7), g in real_field(7)) {
        prop_assert!(hermitian(convolve_real(&f, &g).unwrap().as_field()));
    }

    #[test]
    fn parseval(f in field(8)) {
        let l2 = sobolev_norm(&f, 0.0).powi(2) * std::f64::consts::TAU;
        let abs2 = integral(&convolve_truncated(&f, &f.conjugate()).unwrap());
        prop_assert!((abs2.re - l2).abs() <= 1e-12 * l2);
    }

    #[test]
    fn linear_flow_preserves_weighted_norms(u in field(8), v in real_field(8), t in -5.0f64..5.0, s in -1.0f64..2.0) {
        let p = SpectralPair::new(u, v).unwrap();
        let q = linear_flow(&p, t, -2.0);
        for n in -8i64..=8 {
            prop_assert!((q.u.coeff(n).norm() - p.u.coeff(n).norm()).abs() <= 1e-15);
            prop_assert!((q.v.coeff(n).norm() - p.v.coeff(n).norm()).abs() <= 1e-15);
        }
        let a = sobolev_norm(&p.u, s);
        prop_assert!((sobolev_norm(&q.u, s) - a).abs() <= 1e-14 * a.max(1.0));
    }

    #[test]
    fn e1_and_hermitian_symmetry_under_steps(u in field(5), v in real_field(5)) {
        let params = SBOParams::new(1.0, 1.0, -2.0).unwrap();
        let p = SpectralPair::new(u, v).unwrap();
        let t = rhs(&p, &params).unwrap();
        prop_assert_eq!(t.v.coeff(0), Complex64::new(0.0, 0.0));
        let q = step_strang(&p, 1e-2, &params).unwrap();
        prop_assert_eq!(q.v.coeff(0), p.v.coeff(0));
        prop_assert!(hermitian(q.v.as_field()));
    }

    #[test]
    fn q_forms_agree(n in -500i64..500, n1 in -500i64..500, gamma in -5.0f64..5.0) {
        prop_assert!(q_function(n, n1, gamma).is_ok());
    }
}

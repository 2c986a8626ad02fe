use num_complex::Complex64 as C64;
use proptest::prelude::*;
use qplab_core::arith::{self, golden_mean};
use qplab_core::cocycle;
use qplab_core::dual;
use qplab_core::fit;
use qplab_core::fourier;
use qplab_core::schrodinger::{self, IdsTable};
use qplab_core::tridiag;
use qplab_core::{Potential, TrigPotential};

fn d2_potential(a1: f64, a2: f64, b2: f64) -> TrigPotential {
    TrigPotential::cos_sin(1, a1, 0.0).add(&TrigPotential::cos_sin(2, a2, b2))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn continued_fraction_reconstructs(alpha in 0.001f64..0.999) {
        let p = arith::continued_fraction(alpha, 12);
        prop_assume!(p.is_ok());
        let p = p.unwrap();
        let q = &p.convergent_denominators;
        let qk = *q.last().unwrap() as f64;
        prop_assert!((p.reconstruct() - alpha).abs() <= 1.0 / (qk * qk) + 1e-15);
        prop_assert!(q.windows(2).all(|w| w[1] > w[0]));
        let beta = arith::beta_running(&p);
        prop_assert!(beta.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn sturm_count_is_monotone(seed in proptest::collection::vec(-3.0f64..3.0, 20..60), a in -4.0f64..4.0, b in -4.0f64..4.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(tridiag::sturm_count(&seed, 1.0, lo) <= tridiag::sturm_count(&seed, 1.0, hi));
        let (bl, bh) = tridiag::bounds(&seed, 1.0);
        prop_assert_eq!(tridiag::sturm_count(&seed, 1.0, bl - 1e-9), 0);
        prop_assert_eq!(tridiag::sturm_count(&seed, 1.0, bh + 1e-9), seed.len());
    }

    #[test]
    fn fourier_shift_composes(t1 in -1.0f64..1.0, t2 in -1.0f64..1.0) {
        let n = 64;
        let x: Vec<C64> = (0..n).map(|j| {
            let th = j as f64 / n as f64;
            C64::new((2.0 * std::f64::consts::PI * th).cos() + 0.3 * (6.0 * std::f64::consts::PI * th).sin(), 0.0)
        }).collect();
        let a = fourier::shift(&fourier::shift(&x, t1), t2);
        let b = fourier::shift(&x, t1 + t2);
        let err = a.iter().zip(&b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12);
    }

    #[test]
    fn potential_shift_is_translation(a1 in 0.5f64..2.0, a2 in -1.0f64..1.0, b2 in -1.0f64..1.0, t in 0.0f64..1.0, x in 0.0f64..1.0) {
        let v = d2_potential(a1, a2, b2);
        let w = v.shifted(t);
        prop_assert!((w.evaluate_real(x) - v.evaluate_real((x + t).rem_euclid(1.0))).abs() < 1e-12);
    }

    #[test]
    fn dual_cocycle_is_symplectic(a1 in 0.5f64..2.0, a2 in 0.2f64..1.0, b2 in -1.0f64..1.0, theta in 0.0f64..1.0, eps in -0.2f64..0.2, e in -3.0f64..3.0) {
        let v = d2_potential(a1, a2, b2);
        let defect = dual::symplectic_defect(&v, golden_mean(), C64::new(e, 0.0), theta, eps).unwrap();
        prop_assert!(defect < 1e-10, "{}", defect);
    }

    #[test]
    fn hinge_is_recovered(x0 in 0.1f64..0.4, s in 1.0f64..3.0, c in -1.0f64..1.0) {
        let x: Vec<f64> = (0..41).map(|i| i as f64 * 0.5 / 40.0).collect();
        let y: Vec<f64> = x.iter().map(|&t| c + s * (t - x0).max(0.0)).collect();
        let f = fit::segmented_fit(&x, &y, 3, 1e-6);
        prop_assert_eq!(f.breakpoints.len(), 1);
        prop_assert!((f.breakpoints[0] - x0).abs() < 0.02);
        prop_assert!((f.slopes[1] - s).abs() < 1e-3);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn ids_is_monotone_and_matches_rotation(lambda in 0.5f64..3.0, e in -4.0f64..4.0) {
        let v: Potential = TrigPotential::amo(lambda).into();
        let table = IdsTable::new(&v, golden_mean(), 1000, 4).unwrap();
        let lo = table.at(e - 0.05).n;
        let hi = table.at(e).n;
        prop_assert!(lo <= hi);
        let r = schrodinger::ids_rotation_check_with(&table, &v, golden_mean(), e).unwrap();
        prop_assert!(r.residual < 1e-2, "{:?}", r);
    }

    #[test]
    fn lyapunov_is_even_in_eps(lambda in 0.5f64..3.0, e in -3.0f64..3.0, eps in 0.01f64..0.2) {
        let v: Potential = TrigPotential::amo(lambda).into();
        let c = schrodinger::schrodinger_cocycle(&v, golden_mean(), e);
        let a = cocycle::lyapunov_spectrum(&c.complexify(eps).unwrap(), 1 << 14, 4).unwrap().exponents[0];
        let b = cocycle::lyapunov_spectrum(&c.complexify(-eps).unwrap(), 1 << 14, 4).unwrap().exponents[0];
        prop_assert!((a - b).abs() < 1e-2, "{} {}", a, b);
    }
}

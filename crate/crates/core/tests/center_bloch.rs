use num_complex::Complex64 as C64;
use proptest::prelude::*;
use qplab_core::arith::{self, golden_mean};
use qplab_core::bloch::{self, ConjugationOptions, DiophantineWindow};
use qplab_core::center::{self, CenterOptions};
use qplab_core::dual;
use qplab_core::schrodinger::IdsTable;
use qplab_core::{AnalyticPotential, Error, TrigPotential};

fn turn_distance(a: f64, b: f64) -> f64 {
    arith::circle_norm(a - b)
}

fn d2_energy(n: f64) -> f64 {
    let v = TrigPotential::stock_d2_non_even();
    IdsTable::new(&v.into(), golden_mean(), 2000, 16).unwrap().energy_at(n)
}

#[test]
fn amo_center_is_a_rotation() {
    let v = TrigPotential::amo(2.0);
    let f = center::center_frame(&v, golden_mean(), 0.3, 0.0, &CenterOptions::default()).unwrap();
    assert!(f.frame_residual < 1e-10, "{}", f.frame_residual);
    let l1 = qplab_core::cocycle::lyapunov_spectrum(&f.c_cocycle(), 1 << 14, 4).unwrap().exponents[0];
    assert!(l1.abs() < 1e-3, "{l1}");
}

#[test]
fn fibered_rotation_numbers_split_by_twice_rho_hat() {
    let e = d2_energy(0.8);
    let v = TrigPotential::stock_d2_non_even();
    let f = center::center_frame(&v, golden_mean(), e, 0.0, &CenterOptions::default()).unwrap();
    let r = center::center_rotation(&f).unwrap();
    assert!(turn_distance(r.rho1 - r.rho2, 2.0 * r.rho_hat) < 1e-9);
    assert!(turn_distance(r.rho1 + r.rho2, 2.0 * r.mean_phi) < 1e-9);
    // not even: the phase does not cancel
    assert!(turn_distance(r.rho1, -r.rho2) > 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 5, ..ProptestConfig::default() })]

    #[test]
    fn frame_invariants_survive_section_gauge(
        a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, d in -2.0f64..2.0, im in -1.0f64..1.0,
    ) {
        let g = [C64::new(a, im), C64::new(b, 0.0), C64::new(c, 0.0), C64::new(d, -im)];
        let det = g[0] * g[3] - g[1] * g[2];
        prop_assume!(det.norm() > 0.2);
        let v = TrigPotential::stock_d2_non_even();
        let e = 2.476_547;
        let dc = dual::dual_cocycle(&v, golden_mean(), C64::new(e, 0.0), 0.0).unwrap();
        let opts = CenterOptions { grid_size: 1024, ..CenterOptions::default() };
        let base = center::center_frame_of(&dc, &opts, None).unwrap();
        let gauged = center::center_frame_of(&dc, &opts, Some(g)).unwrap();
        prop_assert!(gauged.frame_residual < 1e-6);
        prop_assert!(gauged.c_imag_max < 1e-6);
        prop_assert!(gauged.det_defect < 1e-8);
        let r0 = center::center_rotation(&base).unwrap();
        let r1 = center::center_rotation(&gauged).unwrap();
        // conjugation moves rho_hat by multiples of alpha / 2 at most
        let moved = (0..8).any(|k| {
            [1.0, -1.0].iter().any(|s| turn_distance(r1.rho2 - r1.rho1, s * (r0.rho2 - r0.rho1) + k as f64 * golden_mean()) < 1e-4)
        });
        prop_assert!(moved, "{:?} vs {:?}", r0, r1);
    }
}

#[test]
fn truncating_a_polynomial_changes_nothing() {
    let a = AnalyticPotential::from_trig(TrigPotential::stock_d2_non_even());
    let opts = CenterOptions { grid_size: 512, ..CenterOptions::default() };
    let study =
        center::truncation_convergence(&a, golden_mean(), 2.476_547, &[2, 3, 4], &opts, &Default::default()).unwrap();
    assert_eq!(study.degrees, vec![2, 3, 4]);
    for &(_, _, dist) in &study.distances {
        assert_eq!(dist, 0.0);
    }
}

#[test]
fn liouville_frequency_overflows_the_divisors() {
    let profile = arith::liouville_frequency(1.0, 2).unwrap();
    let n = 512;
    let phi: Vec<f64> = (0..n)
        .map(|j| {
            let t = j as f64 / n as f64;
            (1..n as i64 / 2).map(|k| 2.0 * 0.9f64.powi(k as i32) * (2.0 * std::f64::consts::PI * k as f64 * t).cos()).sum()
        })
        .collect();
    match bloch::cohomological_solve(&phi, profile.alpha, f64::INFINITY) {
        Err(Error::SmallDivisorOverflow { mode, .. }) => {
            assert_eq!(mode.unsigned_abs() % profile.convergent_denominators[1], 0)
        }
        other => panic!("expected a small divisor, got {other:?}"),
    }
    // golden mean has no small divisors at this size
    let ok = bloch::cohomological_solve(&phi, golden_mean(), f64::INFINITY).unwrap();
    assert!(ok.residual < 1e-10);
}

#[test]
fn resonant_rotation_number_is_rejected() {
    let alpha = golden_mean();
    let w = DiophantineWindow::default();
    assert!(matches!(w.check(0.5 - alpha / 2.0, alpha, 100), Err(Error::WindowRejected { k: 1, .. })));
    assert!(w.check(0.1234, alpha, 100).is_ok());
}

#[test]
fn amo_bloch_wave_matches_direct_diagonalization() {
    let v = TrigPotential::amo(2.0);
    let alpha = golden_mean();
    let e = IdsTable::new(&v.clone().into(), alpha, 2000, 16).unwrap().energy_at(0.55);
    let f = center::center_frame(&v, alpha, e, 0.0, &CenterOptions::default()).unwrap();
    let pair = bloch::bloch_reconstruct(&f, &v, &DiophantineWindow::default(), &ConjugationOptions::default()).unwrap();
    assert!(!pair.stalled);
    assert!(pair.u.residual < 1e-8, "{}", pair.u.residual);
    let cmp = bloch::compare_direct(&v, alpha, &pair.u, 2001).unwrap();
    assert!(cmp.cosine_similarity > 0.999);
    let rate = pair.u.decay_rate / 2f64.ln();
    assert!((0.8..=1.1).contains(&rate), "{rate}");
}

#[test]
fn subcritical_center_is_required() {
    let v = TrigPotential::stock_d2_non_even();
    let e = d2_energy(0.3);
    let f = center::center_frame(&v, golden_mean(), e, 0.0, &CenterOptions::default()).unwrap();
    let r = bloch::bloch_reconstruct(&f, &v, &DiophantineWindow::default(), &ConjugationOptions::default());
    assert!(matches!(r, Err(Error::WindowViolation { .. })), "{r:?}");
}

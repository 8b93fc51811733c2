#![allow(clippy::needless_range_loop)]

mod oracles;

use lzs_core::analytic::population_from_phase;
use lzs_core::{FluxDetuning, QubitSpectrum, TrianglePulse};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn two_level_splitting(l in 0.1f64..5.0, gap in 0.0f64..10.0, d in -50.0f64..50.0) {
        let s = QubitSpectrum::two_level(l, gap).unwrap();
        let lv = s.adiabatic_levels(FluxDetuning(d));
        let expected = 2.0 * ((l * d).powi(2) + gap * gap).sqrt();
        let got = lv[1] - lv[0];
        prop_assert!((got - expected).abs() <= 1e-12 * expected.max(1e-300), "{} vs {}", got, expected);
    }

    #[test]
    fn hamiltonians_are_hermitian(l in 0.1f64..5.0, g12 in 0.0f64..10.0, g13 in 0.0f64..10.0, d in -50.0f64..50.0) {
        for s in [QubitSpectrum::two_level(l, g12).unwrap(), QubitSpectrum::three_level(l, g12, g13).unwrap()] {
            let h = s.hamiltonian_at(FluxDetuning(d));
            prop_assert_eq!(h.hermiticity_error(), 0.0);
            let reference = oracles::hamiltonian(l, &[g12, g13][..s.dim() - 1], d);
            for i in 0..s.dim() {
                for j in 0..s.dim() {
                    prop_assert!((h.get(i, j).re - reference[i][j]).abs() <= 1e-12 * (1.0 + reference[i][j].abs()));
                    prop_assert_eq!(h.get(i, j).im, 0.0);
                }
            }
        }
    }

    #[test]
    fn gapless_levels_are_sorted_diagonal(l in 0.1f64..5.0, d in -50.0f64..50.0) {
        let s = QubitSpectrum::three_level(l, 0.0, 0.0).unwrap();
        let mut diag = s.diabatic_energies(d);
        diag.sort_by(f64::total_cmp);
        let lv = s.adiabatic_levels(FluxDetuning(d));
        for (a, b) in lv.iter().zip(&diag) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn three_level_levels_keep_the_trace(l in 0.1f64..5.0, g12 in 0.0f64..10.0, g13 in 0.0f64..10.0, d in -50.0f64..50.0) {
        let s = QubitSpectrum::three_level(l, g12, g13).unwrap();
        let sum: f64 = s.adiabatic_levels(FluxDetuning(d)).iter().sum();
        let tr: f64 = s.diabatic_energies(d).iter().sum();
        prop_assert!((sum - tr).abs() <= 1e-9 * (1.0 + tr.abs()));
    }

    #[test]
    fn closed_form_population_is_bounded_and_periodic(phi in -1e3f64..1e3) {
        let w = population_from_phase(phi);
        prop_assert!((0.0..=1.0).contains(&w));
        prop_assert!((population_from_phase(phi + 2.0 * std::f64::consts::PI) - w).abs() < 1e-9);
    }

    #[test]
    fn pulse_is_continuous_triangle(pi in -20.0f64..0.0, pf in 0.1f64..80.0, tau in 0.01f64..10.0, f in 0.0f64..1.0) {
        let p = TrianglePulse::new(pi, pf, tau).unwrap();
        let t = f * tau;
        let got = p.detuning_at(t).unwrap().value();
        prop_assert!((got - oracles::drive(pi, pf, tau, t)).abs() <= 1e-9 * (1.0 + pf.abs() + pi.abs()));
        prop_assert!((p.detuning_at(tau - t).unwrap().value() - got).abs() <= 1e-9 * (1.0 + pf.abs() + pi.abs()));
        prop_assert!((p.signal(t).unwrap() - (got - pi)).abs() <= 1e-9 * (1.0 + pf.abs() + pi.abs()));
    }
}

use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use landau_stark::bands::{harper_bands, harper_chain_eigen};
use landau_stark::classical::{initial_point, integrate, ClassicalParams, IntegratorOptions, WallModel};
use landau_stark::landau_stark::{diagonalize_strip, fold_energy, translate_state};
use landau_stark::linalg::wrap_phase;
use landau_stark::statistics::{gap_ratios, ks_distance, poisson_cdf, unfold, wigner_dyson_cdf};
use landau_stark::{build_hamiltonian, BoundaryX, Flux, LatticeConfig};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn folding_lands_in_the_interval(e in -50.0f64..50.0, f in 0.01f64..2.0) {
        let x = fold_energy(e, f);
        prop_assert!(x > -0.5 * f && x <= 0.5 * f + 1e-9);
        let k = (e - x) / f;
        prop_assert!((k - k.round()).abs() < 1e-7);
    }

    #[test]
    fn wrapped_phase_is_equivalent(x in -100.0f64..100.0) {
        let y = wrap_phase(x);
        prop_assert!(y > -PI && y <= PI);
        let k = (x - y) / TAU;
        prop_assert!((k - k.round()).abs() < 1e-9);
    }

    #[test]
    fn flux_is_reduced(num in 0u64..200, den in 1u64..200) {
        let a = Flux::new(num, den).unwrap();
        prop_assert!(a.num() < a.den());
        prop_assert!(((num % den) as f64 / den as f64 - a.value()).abs() < 1e-12);
        prop_assert!((a.phase(a.den() as i64)).abs() < 1e-12);
    }

    #[test]
    fn unfolding_is_scale_free(s in prop::collection::vec(0.01f64..5.0, 10..60), c in 0.1f64..10.0) {
        let a = unfold(&s, 7, true);
        let scaled: Vec<f64> = s.iter().map(|x| x * c).collect();
        let b = unfold(&scaled, 7, true);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn gap_ratios_are_in_unit_interval(s in prop::collection::vec(0.0f64..5.0, 2..60)) {
        for r in gap_ratios(&s, false) {
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn harper_chain_is_shift_covariant(kappa in 0.0f64..TAU, q in 2u64..9) {
        // κ → κ + 2πα relabels the columns of a periodic chain by one site
        let a = Flux::new(1, q).unwrap();
        let w = 3 * q as usize;
        let (e0, _) = harper_chain_eigen(a, 1.0, w, kappa, BoundaryX::Periodic);
        let (e1, _) = harper_chain_eigen(a, 1.0, w, kappa + a.phase(1), BoundaryX::Periodic);
        for (x, y) in e0.iter().zip(&e1) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn band_count_equals_denominator(q in 2u64..12) {
        let b = harper_bands(Flux::new(1, q).unwrap(), 1.0, 16).unwrap();
        prop_assert_eq!(b.band_count(), q as usize);
    }

    #[test]
    fn classical_energy_is_conserved(x in -5.0f64..5.0, y in -5.0f64..5.0, ek in -1.9f64..-0.5) {
        let p = ClassicalParams::new(0.1, 1.0, 0.02, 12.0);
        let s = initial_point(&p, x, y, ek).unwrap();
        let e0 = p.energy(&s);
        let tr = integrate(s, &p, 200.0, 1.0, &IntegratorOptions::default()).unwrap();
        prop_assert!(tr.energy_drift < 1e-8);
        let last = tr.samples.last().unwrap();
        prop_assert!((p.energy(last) - e0).abs() < 1e-8);
        prop_assert!(last.x.abs() <= 6.0 + 1e-9);
    }

    #[test]
    fn smooth_and_free_motion_conserve_energy(ek in -1.9f64..-0.5) {
        for walls in [WallModel::None, WallModel::Smooth { strength: 10.0 }] {
            let p = ClassicalParams::new(0.1, 1.0, 0.02, 12.0).with_walls(walls);
            let s = initial_point(&p, 0.0, 0.0, ek).unwrap();
            let tr = integrate(s, &p, 100.0, 1.0, &IntegratorOptions::default()).unwrap();
            prop_assert!(tr.energy_drift < 1e-8);
        }
    }

    #[test]
    fn translated_states_stay_eigenstates(n in -3i64..=3) {
        let c = LatticeConfig::new(Flux::new(1, 5).unwrap(), 1.0, 0.2, 6);
        let h = build_hamiltonian(&c).unwrap();
        for s in diagonalize_strip(&c).unwrap() {
            let t = translate_state(&s, n, &c).unwrap();
            prop_assert!(h.residual(&t.psi, t.energy).unwrap() < 1e-9);
            prop_assert!((t.energy - s.energy - n as f64 * c.field).abs() < 1e-12);
        }
    }
}

#[test]
fn wigner_samples_pass_ks() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s: Vec<f64> = (0..10_000)
        .map(|_| {
            let u: f64 = rng.random();
            (-4.0 * (1.0 - u).ln() / PI).sqrt()
        })
        .collect();
    let d = ks_distance(&s, wigner_dyson_cdf);
    assert!(d < 0.02, "{d}");
    assert!(ks_distance(&s, poisson_cdf) > 0.1);
}

#[test]
fn strip_states_count_per_interval() {
    for (lx, f) in [(4usize, 0.3), (6, 0.2), (8, 0.15)] {
        let c = LatticeConfig::new(Flux::new(1, 5).unwrap(), 1.0, f, lx);
        assert_eq!(diagonalize_strip(&c).unwrap().len(), lx);
    }
}

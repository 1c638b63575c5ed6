use num_complex::Complex64;
use proptest::prelude::*;

use beamwave::covariance::gamma1_radial;
use beamwave::grid::TransverseGrid;
use beamwave::parabolic::{free_step, observe, phase_step, step_schedule, WaveField};
use beamwave::spectra::SpectrumParams;
use beamwave::stats::energy_distance;

fn field(values: &[(f64, f64)]) -> WaveField {
    let g = TransverseGrid::new(1, values.len(), 0.25).unwrap();
    WaveField::new(values.iter().map(|&(a, b)| Complex64::new(a, b)).collect(), g, 1.5, 0.0).unwrap()
}

fn values() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn free_flow_is_unitary_and_a_group(v in values(), a in 0.0f64..3.0, b in 0.0f64..3.0) {
        let f = field(&v);
        prop_assume!(f.norm_sq() > 1e-6);
        let ab = free_step(&free_step(&f, a).unwrap(), b).unwrap();
        let direct = free_step(&f, a + b).unwrap();
        prop_assert!((ab.norm_sq() / f.norm_sq() - 1.0).abs() < 1e-12);
        for (x, y) in ab.values.iter().zip(&direct.values) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn phase_screen_preserves_modulus(v in values(), slab in prop::collection::vec(-50.0f64..50.0, 64), c in -3.0f64..3.0) {
        let f = field(&v);
        let mut g = f.clone();
        phase_step(&mut g, &slab, c);
        for (x, y) in g.values.iter().zip(&f.values) {
            prop_assert!((x.norm() - y.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn observation_is_linear(v in values(), w in values(), s in -2.0f64..2.0) {
        let (f, t) = (field(&v), field(&w));
        let mut scaled = f.clone();
        scaled.values.iter_mut().for_each(|x| *x *= Complex64::new(0.0, s));
        let lhs = observe(&scaled, &t.values);
        let rhs = Complex64::new(0.0, s) * observe(&f, &t.values);
        prop_assert!((lhs - rhs).norm() < 1e-10 * (1.0 + rhs.norm()));
    }

    #[test]
    fn schedule_tiles_the_range(z in 0.1f64..5.0, dz in 0.001f64..0.5, cut in prop::collection::vec(0.01f64..0.99, 0..4)) {
        let mut cps: Vec<f64> = cut.iter().map(|c| c * z).collect();
        cps.sort_by(f64::total_cmp);
        cps.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let steps = step_schedule(&cps, z, dz);
        prop_assert_eq!(steps[0].0, 0.0);
        prop_assert_eq!(steps.last().unwrap().1, z);
        for w in steps.windows(2) {
            prop_assert_eq!(w[0].1, w[1].0);
        }
        for &(a, b, _) in &steps {
            prop_assert!(b > a && b - a <= dz * (1.0 + 1e-9));
        }
        let hit: Vec<f64> = steps.iter().filter(|s| s.2.is_some()).map(|s| s.1).collect();
        prop_assert_eq!(hit, cps);
    }

    #[test]
    fn kernel_bounded_by_its_origin_value(h in 0.05f64..0.95, eta in 0.2f64..3.0, r in 0.0f64..10.0) {
        let p = SpectrumParams::bounded_power_law(1.0, h, eta, f64::INFINITY).unwrap();
        let g0 = gamma1_radial(&p, 0.0).unwrap();
        let g = gamma1_radial(&p, r).unwrap();
        prop_assert!(g <= g0 * (1.0 + 1e-9) && g >= -1e-9 * g0);
    }

    #[test]
    fn energy_distance_is_a_nonnegative_symmetric_statistic(x in prop::collection::vec(-5.0f64..5.0, 2..40), y in prop::collection::vec(-5.0f64..5.0, 2..40)) {
        let d = energy_distance(&x, &y);
        prop_assert!(d >= -1e-12);
        prop_assert!((d - energy_distance(&y, &x)).abs() < 1e-9);
        prop_assert!(energy_distance(&x, &x).abs() < 1e-12);
    }
}

mod common;

use common::random_instance;
use confope_core::data::{count_stats, hoeffding_widths, simulate, EmpiricalModel, Mode};
use confope_core::environments::thm1_pair;
use confope_core::mdp::{marginalized_kernel, realized_gamma};
use confope_core::rng::Stream;
use confope_core::sensitivity::{alpha, beta, build_uncertainty, sensitivity_bounds, sensitivity_bounds_hoeffding};
use proptest::prelude::*;

#[test]
fn alpha_beta_examples() {
    assert_eq!((alpha(0.3, 1.0), beta(0.3, 1.0)), (1.0, 1.0));
    assert!((alpha(0.5, 2.0) - 0.75).abs() < 1e-15);
    assert!((beta(0.5, 2.0) - 1.5).abs() < 1e-15);
    let eps = 1e-3;
    let g = 1.0 + eps;
    let spread = beta(0.0, g) - alpha(0.0, g);
    assert!(spread <= eps + eps / (1.0 + eps) + 1e-12);
}

#[test]
fn gamma_below_one_is_rejected() {
    let mut rng = Stream::new(1, 0);
    let inst = random_instance(&mut rng, 2, 2, 2, 3, false, 1.0);
    let m = EmpiricalModel::analytic(&inst.mdp, &inst.behavior, Mode::Pooled).unwrap();
    assert!(sensitivity_bounds(&m, 0.5).is_err());
    assert!(sensitivity_bounds(&m, f64::NAN).is_err());
}

#[test]
fn unit_gamma_gives_singleton_set() {
    let mut rng = Stream::new(2, 0);
    let inst = random_instance(&mut rng, 3, 2, 2, 4, false, 1.0);
    for mode in [Mode::Pooled, Mode::PerStep] {
        let m = EmpiricalModel::analytic(&inst.mdp, &inst.behavior, mode).unwrap();
        let tu = build_uncertainty(&m, &sensitivity_bounds(&m, 1.0).unwrap(), None).unwrap();
        for k in 0..m.stages() {
            for s in 0..3 {
                for a in 0..2 {
                    if m.kernel_known(k, s, a) {
                        assert_eq!(tu.lo(k, s, a), m.kernel_row(k, s, a));
                        assert_eq!(tu.hi(k, s, a), m.kernel_row(k, s, a));
                    }
                }
            }
        }
    }
}

#[test]
fn honest_gamma_contains_true_kernel() {
    let b = thm1_pair(0.1, 0.0, 0.5, 0.5, 4).unwrap();
    let m = &b.members[0];
    let gamma = realized_gamma(&m.mdp, &m.behavior).unwrap();
    let model = EmpiricalModel::analytic(&m.mdp, &m.behavior, Mode::Pooled).unwrap();
    let tu = build_uncertainty(&model, &sensitivity_bounds(&model, gamma).unwrap(), None).unwrap();
    let truth = marginalized_kernel(&m.mdp).unwrap();
    for (i, &p) in truth.data().iter().enumerate() {
        let (s, a) = (i / (3 * 2), (i / 3) % 2);
        if tu.known(0, s, a) {
            assert!(tu.lo.data()[i] <= p + 1e-12 && p <= tu.hi.data()[i] + 1e-12);
        }
    }
}

#[test]
fn hoeffding_set_contains_truth_often() {
    let mut rng = Stream::new(3, 0);
    let inst = random_instance(&mut rng, 2, 2, 2, 6, false, 0.6);
    let gamma = realized_gamma(&inst.mdp, &inst.behavior).unwrap();
    let truth = marginalized_kernel(&inst.mdp).unwrap();
    let (d1, d2) = (0.05, 0.05);
    let mut covered = 0;
    let runs = 100;
    for seed in 0..runs {
        let t = simulate(&inst.mdp, &inst.behavior, 300, seed).unwrap();
        let cs = count_stats(&t, 2, 2, 6).unwrap();
        let m = EmpiricalModel::from_counts(&cs, Mode::Pooled);
        let w = hoeffding_widths(&cs, Mode::Pooled, d1, d2).unwrap();
        let sb = sensitivity_bounds_hoeffding(&m, gamma, &w).unwrap();
        let tu = build_uncertainty(&m, &sb, Some(&w)).unwrap();
        let inside = truth
            .data()
            .iter()
            .enumerate()
            .all(|(i, &p)| tu.lo.data()[i] <= p + 1e-12 && p <= tu.hi.data()[i] + 1e-12);
        covered += inside as usize;
    }
    assert!(covered as f64 / runs as f64 >= 1.0 - d1 - d2);
}

#[test]
fn widths_widen_the_envelope() {
    let mut rng = Stream::new(4, 0);
    let inst = random_instance(&mut rng, 3, 2, 2, 5, false, 0.5);
    let t = simulate(&inst.mdp, &inst.behavior, 400, 1).unwrap();
    let cs = count_stats(&t, 3, 2, 5).unwrap();
    let m = EmpiricalModel::from_counts(&cs, Mode::Pooled);
    let w = hoeffding_widths(&cs, Mode::Pooled, 0.1, 0.1).unwrap();
    let plain = build_uncertainty(&m, &sensitivity_bounds(&m, 2.0).unwrap(), None).unwrap();
    let wide = build_uncertainty(&m, &sensitivity_bounds(&m, 2.0).unwrap(), Some(&w)).unwrap();
    for i in 0..plain.lo.data().len() {
        assert!(wide.lo.data()[i] <= plain.lo.data()[i]);
        assert!(wide.hi.data()[i] >= plain.hi.data()[i]);
    }
    assert!(wide.lo.data().iter().zip(plain.lo.data()).any(|(a, b)| a < b));
    assert!(build_uncertainty(
        &EmpiricalModel::from_counts(&cs, Mode::PerStep),
        &sensitivity_bounds(&m, 2.0).unwrap(),
        Some(&w)
    )
    .is_err());
}

#[test]
fn per_step_sets_intersect_into_stationary_box() {
    let mut rng = Stream::new(5, 0);
    let inst = random_instance(&mut rng, 3, 2, 2, 4, false, 1.0);
    let m = EmpiricalModel::analytic(&inst.mdp, &inst.behavior, Mode::PerStep).unwrap();
    let tu = build_uncertainty(&m, &sensitivity_bounds(&m, 3.0).unwrap(), None).unwrap();
    let g = tu.stationary_set().unwrap();
    assert_eq!(g.stages(), 1);
    for k in 0..tu.stages() {
        for s in 0..3 {
            for a in 0..2 {
                if !tu.known(k, s, a) {
                    continue;
                }
                for j in 0..3 {
                    assert!(g.lo(0, s, a)[j] >= tu.lo(k, s, a)[j]);
                    assert!(g.hi(0, s, a)[j] <= tu.hi(k, s, a)[j]);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn alpha_beta_ordering(pi in 0.0f64..=1.0, gamma in 1.0f64..100.0) {
        let (a, b) = (alpha(pi, gamma), beta(pi, gamma));
        prop_assert!(1.0 / gamma <= a + 1e-12);
        prop_assert!(a <= 1.0 + 1e-12);
        prop_assert!(1.0 <= b + 1e-12);
        prop_assert!(b <= gamma + 1e-12);
    }

    #[test]
    fn envelopes_nest_in_gamma(seed in 0u64..5_000, g in 1.0f64..10.0, extra in 0.0f64..10.0) {
        let mut rng = Stream::new(seed, 0);
        let inst = random_instance(&mut rng, 3, 2, 2, 3, false, 1.0);
        let m = EmpiricalModel::analytic(&inst.mdp, &inst.behavior, Mode::Pooled).unwrap();
        let small = build_uncertainty(&m, &sensitivity_bounds(&m, g).unwrap(), None).unwrap();
        let big = build_uncertainty(&m, &sensitivity_bounds(&m, g + extra).unwrap(), None).unwrap();
        for i in 0..small.lo.data().len() {
            prop_assert!(big.lo.data()[i] <= small.lo.data()[i] + 1e-15);
            prop_assert!(big.hi.data()[i] >= small.hi.data()[i] - 1e-15);
            prop_assert!(0.0 <= small.lo.data()[i] && small.lo.data()[i] <= small.hi.data()[i]);
        }
        for s in 0..3 {
            for a in 0..2 {
                prop_assert!(small.lo(0, s, a).iter().sum::<f64>() <= 1.0 + 1e-12);
                prop_assert!(small.hi(0, s, a).iter().sum::<f64>() >= 1.0 - 1e-12);
            }
        }
    }
}

mod common;

use common::random_instance;
use confope_core::data::{
    count_stats, hoeffding_widths, n_star, simulate, simulate_one, CountStats, EmpiricalModel, Mode,
};
use confope_core::mdp::{ConfoundedMdp, ConfounderProcess, InitialDist, ObservedPolicy, Policy};
use confope_core::rng::Stream;
use confope_core::table::StageTable;
use proptest::prelude::*;

#[test]
fn simulation_is_a_function_of_seed() {
    let mut rng = Stream::new(1, 0);
    let inst = random_instance(&mut rng, 3, 2, 2, 5, false, 1.0);
    let a = simulate(&inst.mdp, &inst.behavior, 50, 9).unwrap();
    let b = simulate(&inst.mdp, &inst.behavior, 50, 9).unwrap();
    let c = simulate(&inst.mdp, &inst.behavior, 50, 10).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    // substreams: trajectory i does not depend on how many others are drawn
    let short = simulate(&inst.mdp, &inst.behavior, 10, 9).unwrap();
    assert_eq!(&a[..10], &short[..]);
    assert_eq!(a[7], simulate_one(&inst.mdp, &inst.behavior, 9, 7));
}

#[test]
fn deterministic_system_repeats_itself() {
    let mdp = ConfoundedMdp::new(
        2,
        1,
        2,
        4,
        StageTable::new(1, 8, vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap(),
        vec![0.0, 1.0, 2.0, 3.0],
        ConfounderProcess::Global(vec![1.0]),
        InitialDist::States(vec![1.0, 0.0]),
    )
    .unwrap();
    let pb = Policy::Observed(ObservedPolicy::deterministic(2, &[0, 1]).unwrap());
    let t = simulate(&mdp, &pb, 20, 3).unwrap();
    assert!(t.iter().all(|x| *x == t[0]));
    assert_eq!(t[0].states, vec![0, 1, 1, 1]);
    assert_eq!(t[0].rewards, vec![0.0, 3.0, 3.0, 3.0]);
}

#[test]
fn global_confounder_is_constant_per_trajectory() {
    let mut rng = Stream::new(2, 0);
    let inst = random_instance(&mut rng, 3, 3, 2, 8, true, 1.0);
    for t in simulate(&inst.mdp, &inst.behavior, 200, 1).unwrap() {
        let u = t.confounders.unwrap();
        assert!(u.iter().all(|&x| x == u[0]));
    }
}

#[test]
fn n_star_closed_form() {
    let v = n_star(&[10.0, 1000.0]);
    let expected = -(((-10.0f64).exp() + (-1000.0f64).exp()) / 2.0).ln();
    assert!((v - expected).abs() < 1e-12);
    assert!((v - 10.693).abs() < 1e-3);
}

#[test]
fn hoeffding_closed_form_and_limit() {
    let cs = CountStats {
        n_states: 2,
        n_actions: 2,
        horizon: 1,
        n_trajectories: 200,
        state: vec![100.0, 100.0],
        sa: vec![50.0; 4],
        sas: vec![0.0; 8],
        reward_sum: vec![0.0; 4],
        reward_n: vec![50.0; 4],
    };
    let w = hoeffding_widths(&cs, Mode::PerStep, 0.1, 0.1).unwrap();
    assert!((w.delta_pi[0] - (80f64.ln() / 200.0).sqrt()).abs() < 1e-12);
    assert!((w.delta_pi[0] - 0.1480).abs() < 1e-4);
    assert!(w.delta_p.iter().all(|d| d.is_infinite()));
    let big = CountStats {
        state: vec![1e12, 1e12],
        ..cs.clone()
    };
    assert!(hoeffding_widths(&big, Mode::PerStep, 0.1, 0.1).unwrap().delta_pi[0] < 1e-5);
    assert!(hoeffding_widths(&cs, Mode::PerStep, 0.0, 0.1).is_err());
}

#[test]
fn single_pass_gives_one_hot_rows() {
    let mdp = ConfoundedMdp::new(
        3,
        1,
        1,
        3,
        StageTable::new(1, 9, vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]).unwrap(),
        vec![0.0; 3],
        ConfounderProcess::Global(vec![1.0]),
        InitialDist::States(vec![1.0, 0.0, 0.0]),
    )
    .unwrap();
    let pb = Policy::Observed(ObservedPolicy::uniform(3, 1));
    let t = simulate(&mdp, &pb, 1, 0).unwrap();
    let cs = count_stats(&t, 3, 1, 3).unwrap();
    let m = EmpiricalModel::from_counts(&cs, Mode::Pooled);
    assert_eq!(m.kernel_row(0, 0, 0), &[0.0, 1.0, 0.0]);
    assert_eq!(m.kernel_row(0, 1, 0), &[0.0, 0.0, 1.0]);
    assert!(!m.kernel_known(0, 2, 0));
}

#[test]
fn out_of_range_trajectory_is_rejected() {
    let mut rng = Stream::new(3, 0);
    let inst = random_instance(&mut rng, 3, 2, 2, 4, false, 1.0);
    let mut t = simulate(&inst.mdp, &inst.behavior, 1, 0).unwrap();
    t[0].states[2] = 7;
    assert!(count_stats(&t, 3, 2, 4).is_err());
}

#[test]
fn kernel_error_shrinks_like_root_n() {
    let mut rng = Stream::new(4, 0);
    let inst = random_instance(&mut rng, 3, 2, 2, 5, false, 1.0);
    let truth = EmpiricalModel::analytic(&inst.mdp, &inst.behavior, Mode::Pooled)
        .unwrap()
        .kernel;
    let err = |n: usize, seed: u64| -> f64 {
        let t = simulate(&inst.mdp, &inst.behavior, n, seed).unwrap();
        let m = EmpiricalModel::from_counts(&count_stats(&t, 3, 2, 5).unwrap(), Mode::Pooled);
        m.kernel
            .data()
            .iter()
            .zip(truth.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    let median = |n: usize| {
        let mut v: Vec<f64> = (0..10).map(|s| err(n, 100 + s)).collect();
        v.sort_by(f64::total_cmp);
        0.5 * (v[4] + v[5])
    };
    let (a, b) = (median(500), median(2000));
    let ratio = a / b;
    assert!((2.0 / 1.5..=2.0 * 1.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn pooled_action_frequency_matches_marginal() {
    let b = confope_core::environments::thm1_pair(0.1, 0.0, 0.5, 0.5, 4).unwrap();
    let m = &b.members[0];
    let t = simulate(&m.mdp, &m.behavior, 5000, 5).unwrap();
    let steps = (5000 * m.mdp.horizon()) as f64;
    let freq = t.iter().flat_map(|x| &x.actions).filter(|&&a| a == 0).count() as f64 / steps;
    let p = 0.5 - 2.0 * 0.01;
    assert!((freq - p).abs() <= 3.0 * (p * (1.0 - p) / steps).sqrt());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn counts_are_marginally_consistent(seed in 0u64..10_000, n in 1usize..60, horizon in 1usize..6) {
        let mut rng = Stream::new(seed, 0);
        let inst = random_instance(&mut rng, 3, 2, 3, horizon, false, 1.0);
        let t = simulate(&inst.mdp, &inst.behavior, n, seed).unwrap();
        let cs = count_stats(&t, 3, 3, horizon).unwrap();
        for h in 0..horizon {
            for s in 0..3 {
                let sa: f64 = (0..3).map(|a| cs.sa[(h * 3 + s) * 3 + a]).sum();
                prop_assert_eq!(sa, cs.state[h * 3 + s]);
                for a in 0..3 {
                    let i = (h * 3 + s) * 3 + a;
                    let sas: f64 = cs.sas[i * 3..i * 3 + 3].iter().sum();
                    if h + 1 < horizon {
                        prop_assert_eq!(sas, cs.sa[i]);
                    } else {
                        prop_assert_eq!(sas, 0.0);
                    }
                }
            }
            prop_assert_eq!(cs.state[h * 3..h * 3 + 3].iter().sum::<f64>(), n as f64);
        }
    }

    #[test]
    fn n_star_between_min_and_mean(counts in prop::collection::vec(1.0f64..500.0, 1..10)) {
        let v = n_star(&counts);
        let min = counts.iter().copied().fold(f64::INFINITY, f64::min);
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        prop_assert!(v >= min - 1e-9 && v <= mean + 1e-9);
    }

    #[test]
    fn visited_rows_sum_to_one(seed in 0u64..10_000, per_step in any::<bool>()) {
        let mut rng = Stream::new(seed, 1);
        let inst = random_instance(&mut rng, 4, 2, 2, 4, false, 1.0);
        let t = simulate(&inst.mdp, &inst.behavior, 20, seed).unwrap();
        let mode = if per_step { Mode::PerStep } else { Mode::Pooled };
        let m = EmpiricalModel::from_counts(&count_stats(&t, 4, 2, 4).unwrap(), mode);
        for h in 0..3 {
            for s in 0..4 {
                if m.state_known(h, s) {
                    prop_assert!((m.pi_b(h, s).iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
                for a in 0..2 {
                    if m.kernel_known(h, s, a) {
                        prop_assert!((m.kernel_row(h, s, a).iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    }
                }
            }
        }
    }
}

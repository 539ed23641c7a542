mod common;

use common::{enumerate_value, max_abs_diff, random_instance};
use confope_core::data::simulate;
use confope_core::mdp::{
    evaluate, exact_value, joint_values, marginalize_behavior, marginalized_kernel, mixing_time, occupancies,
    ConfoundedMdp, ConfoundedPolicy, ConfounderProcess, InitialDist, Mixing, NoMixing, ObservedPolicy, Policy,
};
use confope_core::rng::Stream;
use confope_core::table::StageTable;
use confope_core::Error;
use proptest::prelude::*;

fn two_state(kernel: Vec<f64>, na: usize, horizon: usize) -> ConfoundedMdp {
    ConfoundedMdp::new(
        2,
        1,
        na,
        horizon,
        StageTable::new(1, 2 * na * 2, kernel).unwrap(),
        vec![0.0; 2 * na],
        ConfounderProcess::Global(vec![1.0]),
        InitialDist::States(vec![0.5, 0.5]),
    )
    .unwrap()
}

#[test]
fn rejects_bad_rows_and_zero_horizon() {
    let k = StageTable::new(1, 4, vec![0.6, 0.6, 0.5, 0.5]).unwrap();
    let r = ConfoundedMdp::new(
        2,
        1,
        1,
        3,
        k,
        vec![0.0; 2],
        ConfounderProcess::Global(vec![1.0]),
        InitialDist::States(vec![1.0, 0.0]),
    );
    assert!(matches!(r, Err(Error::NotDistribution { .. })));
    let k = StageTable::new(1, 4, vec![0.5; 4]).unwrap();
    let r = ConfoundedMdp::new(
        2,
        1,
        1,
        0,
        k,
        vec![0.0; 2],
        ConfounderProcess::Global(vec![1.0]),
        InitialDist::States(vec![1.0, 0.0]),
    );
    assert!(r.is_err());
}

#[test]
fn zero_rewards_give_zero_value() {
    let mut rng = Stream::new(1, 0);
    let mut inst = random_instance(&mut rng, 3, 2, 2, 5, false, 1.0);
    let zero = ConfoundedMdp::new(
        3,
        2,
        2,
        5,
        inst.mdp.kernel().clone(),
        vec![0.0; 6],
        inst.mdp.process().clone(),
        inst.mdp.initial().clone(),
    )
    .unwrap();
    inst.mdp = zero;
    let v = exact_value(&inst.mdp, &inst.evaluation).unwrap();
    assert_eq!(v.start, 0.0);
    assert!(v.v1.iter().all(|&x| x == 0.0));
}

#[test]
fn exact_value_matches_path_enumeration() {
    let mut rng = Stream::new(2, 0);
    for global in [false, true] {
        for _ in 0..10 {
            let inst = random_instance(&mut rng, 3, 2, 2, 4, global, 1.0);
            let v = exact_value(&inst.mdp, &inst.evaluation).unwrap().start;
            let e = enumerate_value(&inst.mdp, &Policy::Observed(inst.evaluation.clone()));
            assert!((v - e).abs() < 1e-12, "{v} vs {e}");
            let jb = joint_values(&inst.mdp, &inst.behavior).unwrap().start;
            let eb = enumerate_value(&inst.mdp, &inst.behavior);
            assert!((jb - eb).abs() < 1e-12);
        }
    }
}

#[test]
fn exact_value_matches_monte_carlo() {
    let mut rng = Stream::new(3, 0);
    for global in [false, true] {
        let inst = random_instance(&mut rng, 3, 2, 2, 6, global, 1.0);
        let pe = Policy::Observed(inst.evaluation.clone());
        let n = 100_000;
        let returns: Vec<f64> = simulate(&inst.mdp, &pe, n, 11)
            .unwrap()
            .iter()
            .map(|t| t.rewards.iter().sum())
            .collect();
        let mean = returns.iter().sum::<f64>() / n as f64;
        let sd = (returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let v = exact_value(&inst.mdp, &inst.evaluation).unwrap().start;
        assert!((v - mean).abs() <= 4.0 * sd / (n as f64).sqrt(), "{v} vs {mean}");
    }
}

#[test]
fn memoryless_marginal_value_equals_joint_chain() {
    let mut rng = Stream::new(4, 0);
    for _ in 0..20 {
        let inst = random_instance(&mut rng, 4, 3, 2, 7, false, 1.5);
        let k = marginalized_kernel(&inst.mdp).unwrap();
        let b = evaluate(inst.mdp.rewards(), &k, &inst.evaluation, 7);
        let d0 = inst.mdp.initial_states();
        let via_kernel: f64 = b.v1().iter().zip(&d0).map(|(v, p)| v * p).sum();
        let joint = joint_values(&inst.mdp, &Policy::Observed(inst.evaluation.clone()))
            .unwrap()
            .start;
        assert!((via_kernel - joint).abs() < 1e-10);
    }
}

#[test]
fn global_value_is_prior_mixture() {
    let mut rng = Stream::new(5, 0);
    for _ in 0..20 {
        let inst = random_instance(&mut rng, 3, 3, 2, 6, true, 1.0);
        let prior = match inst.mdp.process() {
            ConfounderProcess::Global(p) => p.clone(),
            _ => unreachable!(),
        };
        let d0 = inst.mdp.initial_states();
        let mut mix = 0.0;
        for (u, pu) in prior.iter().enumerate() {
            let b = evaluate(inst.mdp.rewards(), &inst.mdp.conditional_kernel(u), &inst.evaluation, 6);
            mix += pu * b.v1().iter().zip(&d0).map(|(v, p)| v * p).sum::<f64>();
        }
        let v = exact_value(&inst.mdp, &inst.evaluation).unwrap().start;
        assert!((v - mix).abs() < 1e-12);
    }
}

#[test]
fn marginalized_kernel_needs_memoryless() {
    let mut rng = Stream::new(6, 0);
    let inst = random_instance(&mut rng, 2, 2, 2, 3, true, 1.0);
    assert!(matches!(
        marginalized_kernel(&inst.mdp),
        Err(Error::UnsupportedProcess { .. })
    ));
}

#[test]
fn single_confounder_kernel_is_unchanged() {
    let mut rng = Stream::new(7, 0);
    let inst = random_instance(&mut rng, 3, 1, 2, 3, false, 0.0);
    let k = marginalized_kernel(&inst.mdp).unwrap();
    assert!(max_abs_diff(k.data(), inst.mdp.kernel().data()) < 1e-15);
}

#[test]
fn unconfounded_behavior_marginalizes_to_its_slice() {
    let mut rng = Stream::new(8, 0);
    for global in [false, true] {
        let inst = random_instance(&mut rng, 3, 2, 3, 4, global, 0.0);
        let obs = marginalize_behavior(&inst.mdp, &inst.behavior).unwrap();
        for h in 0..4 {
            for s in 0..3 {
                assert!(max_abs_diff(obs.probs(h, s), inst.behavior.probs(h, s, 0)) < 1e-12);
            }
        }
    }
}

#[test]
fn occupancy_of_behavior_against_itself() {
    let mut rng = Stream::new(9, 0);
    let inst = random_instance(&mut rng, 3, 2, 2, 5, false, 0.0);
    let obs = marginalize_behavior(&inst.mdp, &inst.behavior).unwrap();
    let r = occupancies(&inst.mdp, &inst.behavior, &obs).unwrap();
    assert!((r.tau_s - 1.0).abs() < 1e-9, "{}", r.tau_s);
    assert!((r.tau_a - 1.0).abs() < 1e-9, "{}", r.tau_a);
    // A confounded behavior correlates actions with u, so replaying its
    // marginal changes the state occupancy but not the action ratio.
    let inst = random_instance(&mut rng, 3, 2, 2, 5, false, 1.0);
    let obs = marginalize_behavior(&inst.mdp, &inst.behavior).unwrap();
    let r = occupancies(&inst.mdp, &inst.behavior, &obs).unwrap();
    assert!((r.tau_a - 1.0).abs() < 1e-9, "{}", r.tau_a);
    for row in r.behavior.chunks(3) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn symmetric_chain_keeps_uniform_occupancy() {
    let mdp = two_state(vec![0.7, 0.3, 0.2, 0.8, 0.3, 0.7, 0.8, 0.2], 2, 6);
    let pb = Policy::Observed(ObservedPolicy::uniform(2, 2));
    let r = occupancies(&mdp, &pb, &ObservedPolicy::uniform(2, 2)).unwrap();
    assert!(r.behavior.iter().all(|&d| (d - 0.5).abs() < 1e-12));
}

#[test]
fn unreachable_behavior_state_gives_infinite_concentrability() {
    // Behavior never leaves state 0 (action 0 stays); evaluation takes action 1 to state 1.
    let mdp = ConfoundedMdp::new(
        2,
        1,
        2,
        3,
        StageTable::new(1, 8, vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]).unwrap(),
        vec![0.0; 4],
        ConfounderProcess::Global(vec![1.0]),
        InitialDist::States(vec![1.0, 0.0]),
    )
    .unwrap();
    let pb = Policy::Observed(ObservedPolicy::deterministic(2, &[0, 0]).unwrap());
    let pe = ObservedPolicy::deterministic(2, &[1, 1]).unwrap();
    let r = occupancies(&mdp, &pb, &pe).unwrap();
    assert!(r.tau_s.is_infinite());
}

#[test]
fn mixing_time_examples() {
    let flip = two_state(vec![0.5, 0.5, 0.5, 0.5], 1, 4);
    let pb = Policy::Observed(ObservedPolicy::uniform(2, 1));
    assert_eq!(mixing_time(&flip, &pb, 0).unwrap(), Mixing::Steps(1));
    let stuck = two_state(vec![1.0, 0.0, 0.0, 1.0], 1, 4);
    assert_eq!(
        mixing_time(&stuck, &pb, 0).unwrap(),
        Mixing::Failed(NoMixing::Reducible)
    );
    let swap = two_state(vec![0.0, 1.0, 1.0, 0.0], 1, 4);
    assert_eq!(mixing_time(&swap, &pb, 0).unwrap(), Mixing::Failed(NoMixing::Periodic));
}

#[test]
fn confounded_policy_shape_is_checked() {
    assert!(ConfoundedPolicy::stationary(2, 2, 2, vec![0.5; 7]).is_err());
    assert!(ConfoundedPolicy::stationary(2, 2, 2, vec![0.6; 8]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn marginalized_rows_are_distributions(seed in 0u64..10_000, ns in 2usize..5, nu in 1usize..4, na in 1usize..4) {
        let mut rng = Stream::new(seed, 0);
        let inst = random_instance(&mut rng, ns, nu, na, 3, false, 2.0);
        let k = marginalized_kernel(&inst.mdp).unwrap();
        for row in k.data().chunks(ns) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn marginalized_behavior_rows_are_distributions(seed in 0u64..10_000, global in any::<bool>()) {
        let mut rng = Stream::new(seed, 1);
        let inst = random_instance(&mut rng, 3, 3, 3, 4, global, 2.0);
        let obs = marginalize_behavior(&inst.mdp, &inst.behavior).unwrap();
        for h in 0..4 {
            for s in 0..3 {
                prop_assert!((obs.probs(h, s).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn values_stay_within_reward_bounds(seed in 0u64..10_000, horizon in 1usize..8, global in any::<bool>()) {
        let mut rng = Stream::new(seed, 2);
        let inst = random_instance(&mut rng, 3, 2, 2, horizon, global, 1.0);
        let v = exact_value(&inst.mdp, &inst.evaluation).unwrap().start;
        prop_assert!(v >= -1e-12 && v <= horizon as f64 + 1e-12);
    }
}

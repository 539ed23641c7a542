mod common;

use common::{max_abs_diff, random_instance};
use confope_core::data::{simulate, EmpiricalModel, Mode, Trajectory};
use confope_core::environments::{two_mixture, MixtureParams};
use confope_core::global::{truth_labels, ClusterAssignment, ClusterMethod};
use confope_core::mdp::{ObservedPolicy, SoftmaxPolicy};
use confope_core::ope::{fqe, mb_value_and_grad, PgdConfig};
use confope_core::policy_opt::{
    clustering_pg, maxmin_improve, per_cluster_pg, softmax_grad, suboptimality_check, ClusterData, ClusterPgConfig,
    MaxMinConfig, PgEstimator,
};
use confope_core::rng::Stream;
use confope_core::sensitivity::{build_uncertainty, sensitivity_bounds};
use proptest::prelude::*;

fn fold(d: &[f64], stride: usize) -> Vec<f64> {
    let mut out = vec![0.0; stride];
    for row in d.chunks(stride) {
        out.iter_mut().zip(row).for_each(|(o, x)| *o += x);
    }
    out
}

#[test]
fn symmetric_downstream_at_uniform_logits_has_no_gradient() {
    let g = softmax_grad(
        &[0.3, 0.3, 0.3, -1.0, -1.0, -1.0],
        3,
        &[2.0, 2.0, 2.0, -5.0, -5.0, -5.0],
    )
    .unwrap();
    assert!(g.iter().all(|x| x.abs() < 1e-15));
    assert!(softmax_grad(&[0.0; 4], 3, &[0.0; 4]).is_err());
}

#[test]
fn unit_gamma_maxmin_is_plain_ascent() {
    let mut rng = Stream::new(1, 0);
    let inst = random_instance(&mut rng, 3, 2, 2, 5, false, 1.0);
    let m = EmpiricalModel::analytic(&inst.mdp, &inst.behavior, Mode::Pooled).unwrap();
    let tu = build_uncertainty(&m, &sensitivity_bounds(&m, 1.0).unwrap(), None).unwrap();
    let start = inst.mdp.initial_states();
    let theta0 = SoftmaxPolicy::new(3, 2, vec![0.0; 6]).unwrap();
    let cfg = MaxMinConfig {
        outer_iters: 40,
        inner_iters: 5,
        lr0: 0.2,
        inner: PgdConfig::default(),
    };
    let (theta, trace) = maxmin_improve(&m, &tu, &theta0, &cfg, &start).unwrap();
    assert_eq!(trace.len(), 40);
    for w in trace.objective.windows(2) {
        assert!(w[1] >= w[0] - 1e-12);
    }
    let plug = fqe(&m, theta.policy(), &start).unwrap().value;
    assert!((trace.final_objective - plug).abs() < 1e-10);
    assert!(trace.final_objective > trace.objective[0]);
}

#[test]
fn maxmin_raises_a_robust_bound() {
    let mut rng = Stream::new(2, 0);
    let inst = random_instance(&mut rng, 3, 2, 2, 5, false, 1.0);
    let m = EmpiricalModel::analytic(&inst.mdp, &inst.behavior, Mode::Pooled).unwrap();
    let tu = build_uncertainty(&m, &sensitivity_bounds(&m, 3.0).unwrap(), None).unwrap();
    let start = inst.mdp.initial_states();
    let theta0 = SoftmaxPolicy::new(3, 2, vec![0.0; 6]).unwrap();
    let cfg = MaxMinConfig {
        outer_iters: 40,
        ..MaxMinConfig::default()
    };
    let (_, trace) = maxmin_improve(&m, &tu, &theta0, &cfg, &start).unwrap();
    assert!(trace.final_objective > trace.objective[0]);
    assert!(trace.objective.iter().all(|v| v.is_finite()));
}

#[test]
fn reinforce_is_unbiased_on_a_small_instance() {
    let mut rng = Stream::new(3, 0);
    let inst = random_instance(&mut rng, 2, 1, 2, 3, false, 0.0);
    let start = inst.mdp.initial_states();
    let theta = SoftmaxPolicy::new(2, 2, vec![0.4, -0.2, -0.5, 0.3]).unwrap();
    let vg = mb_value_and_grad(inst.mdp.kernel().data(), inst.mdp.rewards(), theta.policy(), 3, &start);
    let exact = softmax_grad(theta.logits(), 2, &fold(&vg.d_policy, 4)).unwrap();
    let t = simulate(&inst.mdp, &inst.behavior, 10_000, 7).unwrap();
    let batches: Vec<Vec<f64>> = t
        .chunks(500)
        .map(|c| {
            let d = ClusterData::new(c, 2, 2, 3).unwrap();
            per_cluster_pg(&d, &theta, PgEstimator::IsReinforce, &start).unwrap()
        })
        .collect();
    let k = batches.len() as f64;
    for i in 0..4 {
        let mean = batches.iter().map(|b| b[i]).sum::<f64>() / k;
        let sd = (batches.iter().map(|b| (b[i] - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
        assert!(
            (mean - exact[i]).abs() <= 3.0 * sd / k.sqrt() + 1e-3,
            "coord {i}: {mean} vs {}",
            exact[i]
        );
    }
}

#[test]
fn action_blind_dynamics_give_zero_approximate_gradient() {
    let t = vec![
        Trajectory {
            states: vec![0, 1, 0],
            actions: vec![0, 0, 1],
            rewards: vec![1.0, 0.0, 1.0],
            confounders: None,
        },
        Trajectory {
            states: vec![0, 1, 0],
            actions: vec![1, 1, 0],
            rewards: vec![1.0, 0.0, 1.0],
            confounders: None,
        },
    ];
    let d = ClusterData::new(&t, 2, 2, 3).unwrap();
    // both actions share transitions and rewards, so Q does not depend on a
    for s in 0..2 {
        assert!(max_abs_diff(d.model.kernel_row(0, s, 0), d.model.kernel_row(0, s, 1)) < 1e-15);
    }
    let theta = SoftmaxPolicy::new(2, 2, vec![0.7, -0.1, 0.2, 0.5]).unwrap();
    let g = per_cluster_pg(&d, &theta, PgEstimator::ApproxOffPolicy, &[1.0, 0.0]).unwrap();
    assert!(g.iter().all(|x| x.abs() <= 1e-6));
}

#[test]
fn mixture_gradient_is_the_weighted_sum() {
    let b = two_mixture(MixtureParams::default()).unwrap();
    let (ns, na, hz) = (b.mdp().n_states(), b.mdp().n_actions(), b.mdp().horizon());
    let t = simulate(b.mdp(), b.behavior(), 400, 1).unwrap();
    let ca = ClusterAssignment::from_labels(truth_labels(&t).unwrap(), 2, ClusterMethod::Given).unwrap();
    let data: Vec<(f64, ClusterData)> = (0..2)
        .map(|u| {
            let members: Vec<Trajectory> = ca.members(u).into_iter().map(|i| t[i].clone()).collect();
            (ca.weights[u], ClusterData::new(&members, ns, na, hz).unwrap())
        })
        .collect();
    let mut rng = Stream::new(4, 0);
    let logits: Vec<f64> = (0..ns * na).map(|_| rng.uniform() - 0.5).collect();
    let theta = SoftmaxPolicy::new(ns, na, logits.clone()).unwrap();
    let mut sum = vec![0.0; ns * na];
    for (w, d) in &data {
        let g = per_cluster_pg(d, &theta, PgEstimator::PlugIn, &b.start).unwrap();
        sum.iter_mut().zip(&g).for_each(|(x, y)| *x += w * y);
    }
    let objective = |th: &[f64]| -> f64 {
        let p = SoftmaxPolicy::new(ns, na, th.to_vec()).unwrap();
        data.iter().map(|(w, d)| w * d.plugin_value(p.policy(), &b.start)).sum()
    };
    let step = 1e-6;
    for i in 0..ns * na {
        let mut th = logits.clone();
        th[i] += step;
        let up = objective(&th);
        th[i] -= 2.0 * step;
        let fd = (up - objective(&th)) / (2.0 * step);
        assert!((fd - sum[i]).abs() < 1e-7, "{i}: {fd} vs {}", sum[i]);
    }
}

#[test]
fn single_cluster_pg_is_ordinary_pg() {
    let b = two_mixture(MixtureParams::default()).unwrap();
    let (ns, na, hz) = (b.mdp().n_states(), b.mdp().n_actions(), b.mdp().horizon());
    let t = simulate(b.mdp(), b.behavior(), 300, 2).unwrap();
    let ca = ClusterAssignment::from_labels(vec![0; t.len()], 1, ClusterMethod::Given).unwrap();
    let theta0 = SoftmaxPolicy::new(ns, na, vec![0.0; ns * na]).unwrap();
    let cfg = ClusterPgConfig {
        iters: 30,
        estimator: PgEstimator::PlugIn,
        ..ClusterPgConfig::default()
    };
    let (theta, trace) = clustering_pg(&t, &ca, ns, na, hz, &theta0, &cfg, &b.start, None).unwrap();
    let d = ClusterData::new(&t, ns, na, hz).unwrap();
    let mut manual = theta0.clone();
    for _ in 0..30 {
        let g = per_cluster_pg(&d, &manual, PgEstimator::PlugIn, &b.start).unwrap();
        let next: Vec<f64> = manual.logits().iter().zip(&g).map(|(x, y)| x + cfg.lr * y).collect();
        manual = SoftmaxPolicy::new(ns, na, next).unwrap();
    }
    assert!(max_abs_diff(theta.logits(), manual.logits()) < 1e-12);
    assert!(trace.final_objective >= trace.objective[0]);
}

#[test]
fn suboptimality_trivial_cases() {
    let v = [0.3, 0.9, 0.1, 0.5];
    let r = suboptimality_check(&v, |x| Ok(*x), |x| Ok(*x)).unwrap();
    assert_eq!((r.gap, r.best, r.chosen), (0.0, 1, 1));
    let r = suboptimality_check(&v, |x| Ok(*x), |x| Ok(*x + 7.0)).unwrap();
    assert_eq!(r.gap, 0.0);
    assert!(r.holds);
    assert!(suboptimality_check::<f64>(&[], |x| Ok(*x), |x| Ok(*x)).is_err());
}

proptest! {
    #[test]
    fn softmax_gradient_matches_finite_differences(
        logits in prop::collection::vec(-3.0f64..3.0, 6),
        down in prop::collection::vec(-2.0f64..2.0, 6),
    ) {
        // V(theta) = sum_s sum_a pi(a|s) g(s, a) has dV/dpi = g
        let v = |th: &[f64]| -> f64 {
            let p = SoftmaxPolicy::new(2, 3, th.to_vec()).unwrap();
            (0..2).map(|s| (0..3).map(|a| p.policy().prob(0, s, a) * down[s * 3 + a]).sum::<f64>()).sum()
        };
        let g = softmax_grad(&logits, 3, &down).unwrap();
        let step = 1e-6;
        for i in 0..6 {
            let mut th = logits.clone();
            th[i] += step;
            let up = v(&th);
            th[i] -= 2.0 * step;
            let fd = (up - v(&th)) / (2.0 * step);
            prop_assert!((fd - g[i]).abs() <= 1e-5 * g.iter().fold(1e-3f64, |m, x| m.max(x.abs())));
        }
    }

    #[test]
    fn softmax_shift_invariance(logits in prop::collection::vec(-3.0f64..3.0, 6), c in -5.0f64..5.0, down in prop::collection::vec(-2.0f64..2.0, 6)) {
        let shifted: Vec<f64> = logits.iter().enumerate().map(|(i, x)| if i < 3 { x + c } else { *x }).collect();
        let (a, b) = (SoftmaxPolicy::new(2, 3, logits.clone()).unwrap(), SoftmaxPolicy::new(2, 3, shifted.clone()).unwrap());
        prop_assert!(max_abs_diff(a.policy().table().data(), b.policy().table().data()) < 1e-12);
        let (ga, gb) = (softmax_grad(&logits, 3, &down).unwrap(), softmax_grad(&shifted, 3, &down).unwrap());
        prop_assert!(max_abs_diff(&ga, &gb) < 1e-12);
        // gradients lie in the tangent space of the shift
        for row in ga.chunks(3) {
            prop_assert!(row.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn suboptimality_bound_holds(seed in 0u64..100_000) {
        let mut rng = Stream::new(seed, 0);
        let idx: Vec<usize> = (0..20).collect();
        let vt: Vec<f64> = idx.iter().map(|_| rng.uniform() * 10.0).collect();
        let vh: Vec<f64> = vt.iter().map(|v| v + 3.0 * (rng.uniform() - 0.5)).collect();
        let r = suboptimality_check(&idx, |&i| Ok(vt[i]), |&i| Ok(vh[i])).unwrap();
        prop_assert!(r.holds);
        prop_assert!(r.gap >= 0.0 && r.gap <= 2.0 * r.max_error + 1e-12);
    }
}

#[test]
fn observed_policy_rows_are_checked() {
    assert!(ObservedPolicy::stationary(2, 2, vec![0.5, 0.5, 0.9, 0.2]).is_err());
}

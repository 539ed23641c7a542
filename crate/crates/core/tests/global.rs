use confope_core::data::{simulate, Trajectory};
use confope_core::environments::{two_mixture, MixtureParams};
use confope_core::global::{
    cluster_separation, cluster_soft_em, clustering_accuracy, clustering_ope, per_cluster_plugin_ope, truth_labels,
    weight_error, ClusterAssignment, ClusterMethod, SeparationConfig,
};
use confope_core::mdp::{exact_value, ConfounderProcess};
use confope_core::rng::Stream;
use proptest::prelude::*;

fn mixture_data(n: usize, seed: u64) -> (confope_core::environments::FixtureBundle, Vec<Trajectory>) {
    let b = two_mixture(MixtureParams::default()).unwrap();
    let t = simulate(b.mdp(), b.behavior(), n, seed).unwrap();
    (b, t)
}

fn prior(b: &confope_core::environments::FixtureBundle) -> Vec<f64> {
    match b.mdp().process() {
        ConfounderProcess::Global(p) => p.clone(),
        _ => unreachable!(),
    }
}

#[test]
fn separation_recovers_mixture_labels() {
    let (b, t) = mixture_data(400, 1);
    let (ns, na) = (b.mdp().n_states(), b.mdp().n_actions());
    let ca = cluster_separation(&t, ns, na, 2, &SeparationConfig::default()).unwrap();
    let truth = truth_labels(&t).unwrap();
    assert!(clustering_accuracy(&ca, &truth).unwrap() < 0.05);
    assert!(weight_error(&ca, &prior(&b)).unwrap() < 0.1);
    assert_eq!(ca.method, ClusterMethod::Separation);
    let d = ca.distances.as_ref().unwrap();
    assert_eq!(d.len(), t.len() * t.len());
}

#[test]
fn separation_ignores_hidden_labels_and_order() {
    let (b, t) = mixture_data(200, 2);
    let (ns, na) = (b.mdp().n_states(), b.mdp().n_actions());
    let cfg = SeparationConfig::default();
    let base = cluster_separation(&t, ns, na, 2, &cfg).unwrap();
    let stripped: Vec<Trajectory> = t.iter().map(|x| x.observed()).collect();
    assert_eq!(
        cluster_separation(&stripped, ns, na, 2, &cfg).unwrap().labels,
        base.labels
    );
    let mut rev = t.clone();
    rev.reverse();
    let mut back = cluster_separation(&rev, ns, na, 2, &cfg).unwrap().labels;
    back.reverse();
    let again = ClusterAssignment::from_labels(back, 2, ClusterMethod::Separation).unwrap();
    assert_eq!(clustering_accuracy(&again, &base.labels).unwrap(), 0.0);
}

#[test]
fn em_objective_never_decreases() {
    let (b, t) = mixture_data(200, 3);
    let (ns, na) = (b.mdp().n_states(), b.mdp().n_actions());
    for seed in 0..5 {
        let ca = cluster_soft_em(&t, ns, na, 2, seed, 30, None).unwrap();
        for w in ca.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
        assert!((ca.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn single_cluster_is_trivial() {
    let (b, t) = mixture_data(50, 4);
    let (ns, na) = (b.mdp().n_states(), b.mdp().n_actions());
    for ca in [
        cluster_separation(&t, ns, na, 1, &SeparationConfig::default()).unwrap(),
        cluster_soft_em(&t, ns, na, 1, 0, 10, None).unwrap(),
    ] {
        assert!(ca.labels.iter().all(|&l| l == 0));
        assert_eq!(weight_error(&ca, &[1.0]).unwrap(), 0.0);
    }
    assert!(cluster_soft_em(&t, ns, na, 60, 0, 10, None).is_err());
}

#[test]
fn truth_labels_decompose_the_estimate() {
    let (b, t) = mixture_data(600, 5);
    let (ns, na, hz) = (b.mdp().n_states(), b.mdp().n_actions(), b.mdp().horizon());
    let truth = truth_labels(&t).unwrap();
    let ope = |c: &[Trajectory]| per_cluster_plugin_ope(c, ns, na, hz, &b.evaluation, &b.start);
    let (r, ca) = clustering_ope(
        &t,
        |_| ClusterAssignment::from_labels(truth.clone(), 2, ClusterMethod::Given),
        ope,
    )
    .unwrap();
    let mut direct = 0.0;
    for u in 0..2 {
        let members: Vec<Trajectory> = ca.members(u).into_iter().map(|i| t[i].clone()).collect();
        direct += ca.weights[u] * ope(&members).unwrap().value;
    }
    assert!((r.value - direct).abs() < 1e-12);
    assert_eq!(r.diagnostics.components.len(), 2);
    let v = exact_value(b.mdp(), &b.evaluation).unwrap().start;
    assert!((r.value - v).abs() / v.abs() < 0.1, "{} vs {v}", r.value);
}

#[test]
fn weight_error_shrinks_with_n() {
    let b = two_mixture(MixtureParams::default()).unwrap();
    let p = prior(&b);
    let med = |n: usize| {
        let mut v: Vec<f64> = (0..15)
            .map(|seed| {
                let t = simulate(b.mdp(), b.behavior(), n, 100 + seed).unwrap();
                let ca = ClusterAssignment::from_labels(truth_labels(&t).unwrap(), 2, ClusterMethod::Given).unwrap();
                weight_error(&ca, &p).unwrap()
            })
            .collect();
        v.sort_by(f64::total_cmp);
        v[7]
    };
    let (a, c) = (med(250), med(4000));
    assert!(c < a / 2.0, "{a} -> {c}");
    assert!(med(1000) <= 0.06);
}

#[test]
fn bad_labels_are_rejected() {
    assert!(ClusterAssignment::from_labels(vec![0, 2], 2, ClusterMethod::Given).is_err());
    assert!(ClusterAssignment::from_labels(vec![0], 0, ClusterMethod::Given).is_err());
    let t = vec![Trajectory {
        states: vec![0],
        actions: vec![0],
        rewards: vec![0.0],
        confounders: None,
    }];
    assert!(truth_labels(&t).is_err());
}

proptest! {
    #[test]
    fn weights_form_a_distribution(labels in prop::collection::vec(0usize..4, 1..200)) {
        let ca = ClusterAssignment::from_labels(labels.clone(), 4, ClusterMethod::Given).unwrap();
        prop_assert!((ca.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for u in 0..4 {
            prop_assert_eq!(ca.members(u).len() as f64 / labels.len() as f64, ca.weights[u]);
        }
    }

    #[test]
    fn accuracy_ignores_relabeling(labels in prop::collection::vec(0usize..3, 1..100), truth_seed in 0u64..1000, perm in Just(vec![2usize, 0, 1])) {
        let mut rng = Stream::new(truth_seed, 0);
        let truth: Vec<usize> = labels.iter().map(|_| rng.below(3)).collect();
        let a = ClusterAssignment::from_labels(labels.clone(), 3, ClusterMethod::Given).unwrap();
        let b = ClusterAssignment::from_labels(labels.iter().map(|&l| perm[l]).collect(), 3, ClusterMethod::Given).unwrap();
        let (ea, eb) = (clustering_accuracy(&a, &truth).unwrap(), clustering_accuracy(&b, &truth).unwrap());
        prop_assert!((ea - eb).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ea));
        prop_assert_eq!(clustering_accuracy(&a, &labels).unwrap(), 0.0);
    }
}

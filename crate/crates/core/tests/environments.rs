mod common;

use std::collections::BTreeMap;

use confope_core::data::{simulate, Trajectory};
use confope_core::environments::{
    alternating_pair, gridworld_iid, hypercube_corners, hypercube_pair, memory_chain, separating_pair, sepsis_toy,
    thm1_pair, two_mixture, FixtureBundle, GridworldParams, MixtureParams, SepsisParams, REPORT_STATE,
};
use confope_core::mdp::{
    exact_value, marginalize_behavior, mixing_time_max, occupancies, trajectory_law, ConfounderProcess, Mixing,
};

fn gap(b: &FixtureBundle) -> f64 {
    let v1 = exact_value(&b.members[0].mdp, &b.evaluation).unwrap().start;
    let v2 = exact_value(&b.members[1].mdp, &b.evaluation).unwrap().start;
    (v1 - v2).abs()
}

/// Two-sample chi-square on observed paths; true when equality is not
/// rejected at level 0.001 (Wilson-Hilferty critical value).
fn same_law(a: &[Trajectory], b: &[Trajectory]) -> bool {
    let key = |t: &Trajectory| -> Vec<usize> { t.states.iter().chain(&t.actions).copied().collect() };
    let mut counts: BTreeMap<Vec<usize>, (f64, f64)> = BTreeMap::new();
    a.iter().for_each(|t| counts.entry(key(t)).or_default().0 += 1.0);
    b.iter().for_each(|t| counts.entry(key(t)).or_default().1 += 1.0);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let stat: f64 = counts.values().map(|&(x, y)| (ka * x - kb * y).powi(2) / (x + y)).sum();
    let df = (counts.len() - 1).max(1) as f64;
    let z = 3.090;
    let crit = df * (1.0 - 2.0 / (9.0 * df) + z * (2.0 / (9.0 * df)).sqrt()).powi(3);
    stat <= crit
}

#[test]
fn thm1_zero_eps_is_one_mdp() {
    let b = thm1_pair(0.0, 0.0, 0.5, 0.5, 10).unwrap();
    assert!(gap(&b) < 1e-12);
}

#[test]
fn thm1_gap_is_two_eps_h() {
    let b = thm1_pair(0.1, 0.0, 0.5, 0.5, 10).unwrap();
    assert!((gap(&b) - 2.0).abs() < 1e-10);
    assert!((b.known("value_gap").unwrap() - 2.0).abs() < 1e-10);
}

#[test]
fn thm1_gap_grows_linearly_near_half() {
    for h in [8usize, 16, 32] {
        let hf = h as f64;
        let b = thm1_pair(0.5 - 1.0 / (hf * hf), 0.0, 0.5, 0.5, h).unwrap();
        assert!(gap(&b) >= hf - 4.0 / hf);
    }
}

#[test]
fn thm1_marginal_behavior_matches_across_pair() {
    let eps = 0.1;
    let b = thm1_pair(eps, 0.0, 0.5, 0.5, 4).unwrap();
    for m in &b.members {
        let obs = marginalize_behavior(&m.mdp, &m.behavior).unwrap();
        for s in 0..m.mdp.n_states() {
            assert!((obs.prob(0, s, 0) - (0.5 - 2.0 * eps * eps)).abs() < 1e-12);
        }
    }
}

#[test]
fn thm1_rejects_eps_half() {
    assert!(thm1_pair(0.5, 0.0, 0.5, 0.5, 10).is_err());
    assert!(thm1_pair(0.1, 1.5, 0.5, 0.5, 10).is_err());
}

#[test]
fn thm1_members_pass_chi_square() {
    let b = thm1_pair(0.2, 0.0, 0.5, 0.5, 3).unwrap();
    let a = simulate(&b.members[0].mdp, &b.members[0].behavior, 10_000, 1).unwrap();
    let c = simulate(&b.members[1].mdp, &b.members[1].behavior, 10_000, 2).unwrap();
    assert!(same_law(&a, &c));
}

#[test]
fn memory_chain_values() {
    let b = memory_chain(2).unwrap();
    assert!((exact_value(b.mdp(), &b.evaluation).unwrap().start - 2.0).abs() < 1e-12);
    let b = memory_chain(64).unwrap();
    assert!((exact_value(b.mdp(), &b.evaluation).unwrap().start - 64.0).abs() < 1e-12);
    let r = occupancies(b.mdp(), b.behavior(), &b.evaluation).unwrap();
    assert!((r.tau_a - 2.0).abs() < 1e-12);
    let obs = marginalize_behavior(b.mdp(), b.behavior()).unwrap();
    for s in 0..2 {
        assert!(obs.probs(0, s).iter().all(|&p| (p - 0.5).abs() < 1e-12));
    }
    assert!(memory_chain(1).is_err());
}

#[test]
fn alternating_behavior_earns_nothing() {
    let b = alternating_pair(6).unwrap();
    for m in &b.members {
        let trajs = simulate(&m.mdp, &m.behavior, 200, 3).unwrap();
        assert!(trajs.iter().all(|t| t.rewards.iter().sum::<f64>() == 0.0));
    }
    assert_eq!(exact_value(&b.members[1].mdp, &b.evaluation).unwrap().start, 0.0);
    assert!(alternating_pair(1).is_err());
}

#[test]
fn alternating_laws_match_exactly() {
    let b = alternating_pair(6).unwrap();
    let l1 = trajectory_law(&b.members[0].mdp, &b.members[0].behavior).unwrap();
    let l2 = trajectory_law(&b.members[1].mdp, &b.members[1].behavior).unwrap();
    assert_eq!(l1.len(), 2);
    assert_eq!(l1.keys().collect::<Vec<_>>(), l2.keys().collect::<Vec<_>>());
    for (k, p) in &l1 {
        assert!((p - 0.5).abs() < 1e-12);
        assert!((p - l2[k]).abs() < 1e-12);
    }
    let a = simulate(&b.members[0].mdp, &b.members[0].behavior, 10_000, 4).unwrap();
    let c = simulate(&b.members[1].mdp, &b.members[1].behavior, 10_000, 5).unwrap();
    assert!(same_law(&a, &c));
}

#[test]
fn hypercube_gap_formula() {
    let b = hypercube_pair(8, [[0.99, 0.98], [0.01, 0.02]], 9).unwrap();
    let (corner, _) = hypercube_corners(8);
    let v0 = exact_value(&b.members[0].mdp, &b.evaluation).unwrap().v1[corner];
    let v1 = exact_value(&b.members[1].mdp, &b.evaluation).unwrap().v1[corner];
    assert!(((v0 - v1).abs() - 7.76).abs() < 1e-10);
}

#[test]
fn hypercube_equal_rows_have_no_gap() {
    let b = hypercube_pair(6, [[0.3, 0.3], [0.3, 0.3]], 5).unwrap();
    assert!(b.known("value_gap").unwrap().abs() < 1e-12);
}

#[test]
fn hypercube_rejects_negative_entries() {
    assert!(hypercube_pair(8, [[0.99, 0.98], [-0.01, 0.02]], 2).is_err());
}

#[test]
fn hypercube_short_trajectories_are_indistinguishable() {
    let b = hypercube_pair(8, [[0.99, 0.98], [0.01, 0.02]], 2).unwrap();
    let laws: Vec<_> = b
        .members
        .iter()
        .map(|m| trajectory_law(&m.mdp, &m.behavior).unwrap())
        .collect();
    for (k, p) in &laws[0] {
        assert!((p.ln() - laws[1][k].ln()).abs() < 1e-12);
    }
    let a = simulate(&b.members[0].mdp, &b.members[0].behavior, 10_000, 6).unwrap();
    let c = simulate(&b.members[1].mdp, &b.members[1].behavior, 10_000, 7).unwrap();
    assert!(same_law(&a, &c));
}

#[test]
fn gridworld_shape_and_reproducibility() {
    let b = gridworld_iid(GridworldParams::default()).unwrap();
    let m = b.mdp();
    assert_eq!((m.n_states(), m.n_actions(), m.horizon()), (16, 4, 8));
    let v = exact_value(m, &b.evaluation).unwrap().v1[REPORT_STATE];
    assert!(v.is_finite());
    let again = gridworld_iid(GridworldParams::default()).unwrap();
    assert_eq!(exact_value(again.mdp(), &again.evaluation).unwrap().v1[REPORT_STATE], v);
    let bad = GridworldParams {
        slip_high: 1.5,
        ..GridworldParams::default()
    };
    assert!(gridworld_iid(bad).is_err());
}

#[test]
fn sepsis_separating_pair_differs() {
    let b = sepsis_toy(SepsisParams::default()).unwrap();
    let (s, a) = separating_pair(3);
    let m = b.mdp();
    let (r0, r1) = (m.kernel_row(0, s, 0, a), m.kernel_row(0, s, 1, a));
    let d: f64 = r0.iter().zip(r1).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    assert!(d > 0.0);
    assert_eq!(m.horizon(), 60);
    assert!(matches!(m.process(), ConfounderProcess::Global(_)));
}

#[test]
fn sepsis_single_confounder_builds() {
    let b = sepsis_toy(SepsisParams {
        n_confounders: 1,
        horizon: 10,
        ..SepsisParams::default()
    })
    .unwrap();
    assert_eq!(b.mdp().n_confounders(), 1);
    assert!(sepsis_toy(SepsisParams {
        levels: 6,
        ..SepsisParams::default()
    })
    .is_err());
}

#[test]
fn global_fixtures_keep_confounder_fixed() {
    let b = two_mixture(MixtureParams::default()).unwrap();
    for t in simulate(b.mdp(), b.behavior(), 100, 8).unwrap() {
        let u = t.confounders.unwrap();
        assert!(u.iter().all(|&x| x == u[0]));
    }
}

#[test]
fn known_quantities_are_finite_or_flagged() {
    let bundles = [
        thm1_pair(0.1, 0.0, 0.5, 0.5, 10).unwrap(),
        memory_chain(16).unwrap(),
        alternating_pair(10).unwrap(),
        hypercube_pair(8, [[0.99, 0.98], [0.01, 0.02]], 2).unwrap(),
        gridworld_iid(GridworldParams::default()).unwrap(),
        two_mixture(MixtureParams::default()).unwrap(),
    ];
    for b in &bundles {
        assert!(!b.known.is_empty(), "{}", b.id);
        assert!((b.start.iter().sum::<f64>() - 1.0).abs() < 1e-12, "{}", b.id);
    }
}

#[test]
fn hypercube_mixes_in_n_log_n() {
    // c calibrated on n = 2..10, where the ratio peaks at n = 2
    let c = 2.5;
    for n in [2usize, 4, 8, 10] {
        let b = hypercube_pair(n, [[0.99, 0.98], [0.01, 0.02]], 2).unwrap();
        for m in &b.members {
            match mixing_time_max(&m.mdp, &m.behavior).unwrap() {
                Mixing::Steps(t) => assert!(t as f64 <= c * n as f64 * (n as f64).ln(), "n={n}: {t}"),
                other => panic!("n={n}: {other:?}"),
            }
        }
    }
}

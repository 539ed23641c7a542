use alloc::vec;
use alloc::vec::Vec;

use super::{prob, FixtureBundle, Known, Member};
use crate::error::{Error, Result};
use crate::mdp::{
    exact_value, observed_law, realized_gamma, ConfoundedMdp, ConfoundedPolicy, ConfounderProcess, InitialDist,
    ObservedPolicy, Policy,
};
use crate::table::StageTable;

/// Two memoryless confounded MDPs whose behavior data have the same law but
/// whose values under "always action 1" differ by `2 eps H |1 - 2z|`.
///
/// States: 0 and 1 are the two states of the construction (reward 1 in
/// state 0), 2 is a reward-free start state. Transitions ignore the current
/// state, so each of the `horizon` later states is an independent draw and
/// the MDP horizon is `horizon + 1`.
pub fn thm1_pair(eps: f64, z: f64, z1: f64, z2: f64, horizon: usize) -> Result<FixtureBundle> {
    if !(0.0..0.5).contains(&eps) {
        return Err(Error::param(alloc::format!("eps must lie in [0, 1/2), got {eps}")));
    }
    prob("z", z)?;
    prob("z1", z1)?;
    prob("z2", z2)?;
    if horizon == 0 {
        return Err(Error::param("horizon must be positive"));
    }
    let build = |second: bool| -> Result<Member> {
        // q[u][a] = P(s' = state 0 | u, a)
        let q = if second {
            [[z, z2], [1.0 - z, z1]]
        } else {
            [[z, z1], [1.0 - z, z2]]
        };
        let (ns, nu, na) = (3, 2, 2);
        let mut kernel = vec![0.0; ns * nu * na * ns];
        for s in 0..ns {
            for u in 0..nu {
                for a in 0..na {
                    let base = ((s * nu + u) * na + a) * ns;
                    kernel[base] = q[u][a];
                    kernel[base + 1] = 1.0 - q[u][a];
                }
            }
        }
        let pu = if second {
            [0.5 + eps, 0.5 - eps]
        } else {
            [0.5 - eps, 0.5 + eps]
        };
        let table: Vec<f64> = (0..ns).flat_map(|_| pu).collect();
        let reward = vec![1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let mdp = ConfoundedMdp::new(
            ns,
            nu,
            na,
            horizon + 1,
            StageTable::new(1, ns * nu * na * ns, kernel)?,
            reward,
            ConfounderProcess::Memoryless(StageTable::new(1, ns * nu, table)?),
            InitialDist::States(vec![0.0, 0.0, 1.0]),
        )?;
        let (hi, lo) = (0.5 + eps, 0.5 - eps);
        let rows = if second {
            [[lo, hi], [hi, lo]]
        } else {
            [[hi, lo], [lo, hi]]
        };
        let pol: Vec<f64> = (0..ns).flat_map(|_| rows.iter().flatten().copied()).collect();
        let behavior = Policy::Confounded(ConfoundedPolicy::stationary(ns, nu, na, pol)?);
        Ok(Member { mdp, behavior })
    };
    let m1 = build(false)?;
    let m2 = build(true)?;
    let evaluation = ObservedPolicy::deterministic(2, &[0, 0, 0])?;

    let mut known = Known::new();
    let l1 = observed_law(&m1.mdp, &m1.behavior)?;
    let l2 = observed_law(&m2.mdp, &m2.behavior)?;
    let mut diff: f64 = 0.0;
    for h in 0..horizon + 1 {
        for s in 0..3 {
            for a in 0..2 {
                let (p1, p2) = (l1.pi_b.stage(h)[s * 2 + a], l2.pi_b.stage(h)[s * 2 + a]);
                for s2 in 0..3 {
                    let j1 = p1 * l1.kernel.stage(h)[(s * 2 + a) * 3 + s2];
                    let j2 = p2 * l2.kernel.stage(h)[(s * 2 + a) * 3 + s2];
                    diff = diff.max((j1 - j2).abs());
                }
            }
        }
    }
    known.check_at_most("observed_joint_max_diff", 1e-12, diff)?;
    let v1 = exact_value(&m1.mdp, &evaluation)?.start;
    let v2 = exact_value(&m2.mdp, &evaluation)?.start;
    let h = horizon as f64;
    known.check("value_m1", h * ((0.5 - eps) * z + (0.5 + eps) * (1.0 - z)), v1, 1e-10)?;
    known.check("value_m2", h * ((0.5 + eps) * z + (0.5 - eps) * (1.0 - z)), v2, 1e-10)?;
    known.check(
        "value_gap",
        2.0 * eps * h * (1.0 - 2.0 * z).abs(),
        (v1 - v2).abs(),
        1e-10,
    )?;
    let e2 = 2.0 * eps * eps;
    let gamma = ((0.5 + eps) / (0.5 - eps)) * ((0.5 + e2) / (0.5 - e2));
    known.check("observed_pi_a1", 0.5 - e2, l1.pi_b.stage(0)[0], 1e-12)?;
    known.check("gamma", gamma, realized_gamma(&m1.mdp, &m1.behavior)?, 1e-9)?;
    known.check("gamma_m2", gamma, realized_gamma(&m2.mdp, &m2.behavior)?, 1e-9)?;

    Ok(FixtureBundle {
        id: "thm1",
        members: vec![m1, m2],
        evaluation,
        start: vec![0.0, 0.0, 1.0],
        known: known.into_inner(),
        cluster_view: None,
    })
}

use alloc::vec;
use alloc::vec::Vec;

use super::{prob, FixtureBundle, Known, Member};
use crate::error::{Error, Result};
use crate::mdp::{
    exact_value, realized_gamma, ConfoundedMdp, ConfoundedPolicy, ConfounderProcess, InitialDist, ObservedPolicy,
    Policy,
};
use crate::table::StageTable;

pub const SIDE: usize = 4;
pub const GOAL: usize = 3;
/// State the experiments report values for.
pub const REPORT_STATE: usize = 13;

/// Confounded 4x4 gridworld. States are numbered row-major from the top
/// left; actions are W, E, N, S. Each step a fresh binary confounder picks
/// a high (`u = 1`) or low (`u = 0`) slip probability; a slip sends the
/// agent in a uniformly random direction. The behavior policy is
/// epsilon-greedy with an exploration rate that also depends on `u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridworldParams {
    pub slip_high: f64,
    pub slip_low: f64,
    /// `P(u = 1 | s)`.
    pub p_u: f64,
    pub explore_high: f64,
    pub explore_low: f64,
    pub step_reward: f64,
    pub goal_reward: f64,
    pub horizon: usize,
}

impl Default for GridworldParams {
    fn default() -> Self {
        GridworldParams {
            slip_high: 0.9,
            slip_low: 0.5,
            p_u: 0.5,
            explore_high: 0.8,
            explore_low: 0.4,
            step_reward: -0.1,
            goal_reward: 1.0,
            horizon: 8,
        }
    }
}

fn step(s: usize, a: usize) -> usize {
    let (r, c) = (s / SIDE, s % SIDE);
    let (r2, c2) = match a {
        0 if c > 0 => (r, c - 1),
        1 if c + 1 < SIDE => (r, c + 1),
        2 if r > 0 => (r - 1, c),
        3 if r + 1 < SIDE => (r + 1, c),
        _ => (r, c),
    };
    r2 * SIDE + c2
}

/// East until the last column, then north.
pub fn greedy_action(s: usize) -> usize {
    if s % SIDE + 1 < SIDE {
        1
    } else {
        2
    }
}

pub fn gridworld_iid(params: GridworldParams) -> Result<FixtureBundle> {
    let GridworldParams {
        slip_high,
        slip_low,
        p_u,
        explore_high,
        explore_low,
        step_reward,
        goal_reward,
        horizon,
    } = params;
    prob("slip_high", slip_high)?;
    prob("slip_low", slip_low)?;
    prob("p_u", p_u)?;
    prob("explore_high", explore_high)?;
    prob("explore_low", explore_low)?;
    if horizon == 0 || !step_reward.is_finite() || !goal_reward.is_finite() {
        return Err(Error::param("invalid gridworld horizon or rewards"));
    }
    let (ns, nu, na) = (SIDE * SIDE, 2, 4);
    let slip = [slip_low, slip_high];
    let mut kernel = vec![0.0; ns * nu * na * ns];
    for s in 0..ns {
        for u in 0..nu {
            for a in 0..na {
                let base = ((s * nu + u) * na + a) * ns;
                if s == GOAL {
                    kernel[base + s] = 1.0;
                    continue;
                }
                kernel[base + step(s, a)] += 1.0 - slip[u];
                for d in 0..na {
                    kernel[base + step(s, d)] += slip[u] / na as f64;
                }
            }
        }
    }
    let mut reward = vec![step_reward; ns * na];
    for a in 0..na {
        reward[GOAL * na + a] = goal_reward;
    }
    let table: Vec<f64> = (0..ns).flat_map(|_| [1.0 - p_u, p_u]).collect();
    let mut d0 = vec![1.0 / (ns - 1) as f64; ns];
    d0[GOAL] = 0.0;
    let mdp = ConfoundedMdp::new(
        ns,
        nu,
        na,
        horizon,
        StageTable::new(1, ns * nu * na * ns, kernel)?,
        reward,
        ConfounderProcess::Memoryless(StageTable::new(1, ns * nu, table)?),
        InitialDist::States(d0),
    )?;
    let explore = [explore_low, explore_high];
    let mut pol = vec![0.0; ns * nu * na];
    for s in 0..ns {
        let g = greedy_action(s);
        for u in 0..nu {
            let row = &mut pol[(s * nu + u) * na..(s * nu + u + 1) * na];
            for (a, x) in row.iter_mut().enumerate() {
                *x = explore[u] / na as f64 + if a == g { 1.0 - explore[u] } else { 0.0 };
            }
        }
    }
    let behavior = Policy::Confounded(ConfoundedPolicy::stationary(ns, nu, na, pol)?);
    let actions: Vec<usize> = (0..ns).map(greedy_action).collect();
    let evaluation = ObservedPolicy::deterministic(na, &actions)?;

    let mut known = Known::new();
    let gamma = realized_gamma(&mdp, &behavior)?;
    known.check("gamma", gamma, gamma, 0.0)?;
    let v = exact_value(&mdp, &evaluation)?;
    // the per-u DP on the joint chain must agree with the marginal route
    let joint = crate::mdp::joint_values(&mdp, &Policy::Observed(evaluation.clone()))?;
    known.check("value_report_state", v.v1[REPORT_STATE], joint.v1[REPORT_STATE], 1e-10)?;
    let mut start = vec![0.0; ns];
    start[REPORT_STATE] = 1.0;
    Ok(FixtureBundle {
        id: "gridworld",
        members: vec![Member { mdp, behavior }],
        evaluation,
        start,
        known: known.into_inner(),
        cluster_view: None,
    })
}

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use super::{FixtureBundle, Known, Member};
use crate::error::{Error, Result};
use crate::mdp::{
    exact_value, observed_law, realized_gamma, trajectory_law, ConfoundedMdp, ConfoundedPolicy, ConfounderProcess,
    InitialDist, ObservedPolicy, Policy,
};
use crate::table::StageTable;

const STAR: usize = 0;
const BROKEN: usize = 3;

/// Confounder classes: 0 = empty history, 1 + x = alternating history whose
/// last action is x, 3 = history that stopped alternating.
fn next(u: usize, a: usize) -> usize {
    match u {
        STAR => 1 + a,
        BROKEN => BROKEN,
        last if last - 1 == a => BROKEN,
        _ => 1 + a,
    }
}

/// A pair of MDPs with history-dependent confounders whose behavior data
/// coincide. The behavior policy always alternates actions, so it only ever
/// sees state 1 (reward 0). In the first MDP any non-alternating action
/// history sends the chain to state 0 (reward 1); in the second nothing
/// does. The transition at step `h` depends on the actions up to and
/// including `a_h`.
pub fn alternating_pair(horizon: usize) -> Result<FixtureBundle> {
    if horizon < 2 {
        return Err(Error::param("alternating pair needs H >= 2"));
    }
    let (ns, nu, na) = (2, 4, 2);
    let next_table: Vec<usize> = (0..nu).flat_map(|u| (0..na).map(move |a| next(u, a))).collect();
    let build = |leaky: bool| -> Result<ConfoundedMdp> {
        let mut kernel = vec![0.0; ns * nu * na * ns];
        for s in 0..ns {
            for u in 0..nu {
                for a in 0..na {
                    let base = ((s * nu + u) * na + a) * ns;
                    if leaky && next(u, a) == BROKEN {
                        kernel[base] = 1.0;
                    } else {
                        kernel[base + 1] = 1.0;
                    }
                }
            }
        }
        ConfoundedMdp::new(
            ns,
            nu,
            na,
            horizon,
            StageTable::new(1, ns * nu * na * ns, kernel)?,
            vec![1.0, 1.0, 0.0, 0.0],
            ConfounderProcess::HistoryDeterministic {
                initial: STAR,
                next: next_table.clone(),
            },
            InitialDist::States(vec![0.0, 1.0]),
        )
    };
    let mut pol = vec![0.0; ns * nu * na];
    for s in 0..ns {
        for u in 0..nu {
            let row = &mut pol[(s * nu + u) * na..(s * nu + u + 1) * na];
            match u {
                STAR | BROKEN => row.iter_mut().for_each(|x| *x = 0.5),
                last => row[1 - (last - 1)] = 1.0,
            }
        }
    }
    let behavior = Policy::Confounded(ConfoundedPolicy::stationary(ns, nu, na, pol)?);
    let m1 = Member {
        mdp: build(true)?,
        behavior: behavior.clone(),
    };
    let m2 = Member {
        mdp: build(false)?,
        behavior,
    };
    let evaluation = ObservedPolicy::uniform(ns, na);

    let mut known = Known::new();
    let h = horizon as f64;
    known.check(
        "value_m1",
        h - 3.0 + 2.0.powf(2.0 - h),
        exact_value(&m1.mdp, &evaluation)?.start,
        1e-10,
    )?;
    known.check("value_m2", 0.0, exact_value(&m2.mdp, &evaluation)?.start, 1e-12)?;
    known.check("gamma", f64::INFINITY, realized_gamma(&m1.mdp, &m1.behavior)?, 0.0)?;
    let diff = if horizon <= 16 {
        let a = trajectory_law(&m1.mdp, &m1.behavior)?;
        let b = trajectory_law(&m2.mdp, &m2.behavior)?;
        let mut d: f64 = 0.0;
        for (k, p) in a.iter() {
            d = d.max((p - b.get(k).copied().unwrap_or(0.0)).abs());
        }
        for (k, p) in b.iter() {
            d = d.max((p - a.get(k).copied().unwrap_or(0.0)).abs());
        }
        d
    } else {
        let a = observed_law(&m1.mdp, &m1.behavior)?;
        let b = observed_law(&m2.mdp, &m2.behavior)?;
        let mut d: f64 = 0.0;
        for i in 0..a.state_occ.len() {
            d = d.max((a.state_occ[i] - b.state_occ[i]).abs());
        }
        for i in 0..a.sa_occ.len() {
            d = d.max((a.sa_occ[i] - b.sa_occ[i]).abs());
        }
        d
    };
    known.check_at_most("observed_law_max_diff", 1e-12, diff)?;

    Ok(FixtureBundle {
        id: "alternating",
        members: vec![m1, m2],
        evaluation,
        start: vec![0.0, 1.0],
        known: known.into_inner(),
        cluster_view: None,
    })
}

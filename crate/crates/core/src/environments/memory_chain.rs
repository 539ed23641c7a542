use alloc::vec;

use super::{FixtureBundle, Known, Member};
use crate::data::{EmpiricalModel, Mode};
use crate::error::{Error, Result};
use crate::mdp::{exact_value, occupancies, ConfoundedMdp, ConfounderProcess, InitialDist, ObservedPolicy, Policy};
use crate::ope::fqe;
use crate::table::StageTable;

/// Two states, two actions and a confounder that remembers whether every
/// action so far was action 0. While it does, action 0 keeps the chain in
/// state 0 (reward 1); otherwise state 0 is only reached with probability
/// `1/H`. Behavior is uniform and confounder-blind, yet FQE on infinite
/// data stays logarithmic in `H` while the true value is `H`.
///
/// Confounder 0 is "all actions so far were action 0", confounder 1 is the
/// absorbing "something else happened".
pub fn memory_chain(horizon: usize) -> Result<FixtureBundle> {
    if horizon < 2 {
        return Err(Error::param("memory chain needs H >= 2"));
    }
    let (ns, nu, na) = (2, 2, 2);
    let leak = 1.0 / horizon as f64;
    let mut kernel = vec![0.0; ns * nu * na * ns];
    for s in 0..ns {
        for u in 0..nu {
            for a in 0..na {
                let base = ((s * nu + u) * na + a) * ns;
                if u == 0 && a == 0 {
                    kernel[base] = 1.0;
                } else {
                    kernel[base] = leak;
                    kernel[base + 1] = 1.0 - leak;
                }
            }
        }
    }
    let mdp = ConfoundedMdp::new(
        ns,
        nu,
        na,
        horizon,
        StageTable::new(1, ns * nu * na * ns, kernel)?,
        vec![1.0, 0.0, 0.0, 0.0],
        ConfounderProcess::HistoryDeterministic {
            initial: 0,
            next: vec![0, 1, 1, 1],
        },
        InitialDist::States(vec![1.0, 0.0]),
    )?;
    let behavior = Policy::Observed(ObservedPolicy::uniform(ns, na));
    let evaluation = ObservedPolicy::deterministic(na, &[0, 0])?;
    let start = vec![1.0, 0.0];

    let mut known = Known::new();
    let h = horizon as f64;
    known.check("true_value", h, exact_value(&mdp, &evaluation)?.start, 1e-12)?;
    let model = EmpiricalModel::analytic(&mdp, &behavior, Mode::PerStep)?;
    let est = fqe(&model, &evaluation, &start)?.value;
    known.check_at_most("fqe_cap", 2.0 * h.log2() + 9.0, est)?;
    known.check("tau_a", 2.0, occupancies(&mdp, &behavior, &evaluation)?.tau_a, 1e-12)?;

    Ok(FixtureBundle {
        id: "memory-chain",
        members: vec![Member { mdp, behavior }],
        evaluation,
        start,
        known: known.into_inner(),
        cluster_view: None,
    })
}

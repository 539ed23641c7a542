//! Trajectory simulation, count statistics and empirical models.

mod model;
mod stats;

pub use model::{EmpiricalModel, Mode};
pub use stats::{count_stats, hoeffding_widths, n_star, CountStats, HoeffdingWidths};

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mdp::{ConfoundedMdp, ConfounderProcess, Policy};
use crate::rng::Stream;

/// One behavior episode. `confounders` is only present for simulated data.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub confounders: Option<Vec<usize>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Copy without the hidden confounder labels.
    pub fn observed(&self) -> Trajectory {
        Trajectory {
            confounders: None,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub env_id: String,
    pub seed: u64,
    pub horizon: usize,
    pub trajectories: Vec<Trajectory>,
}

impl Dataset {
    /// Checks lengths and index ranges against an MDP's sizes.
    pub fn validate(&self, n_states: usize, n_actions: usize) -> Result<()> {
        for (i, t) in self.trajectories.iter().enumerate() {
            check_trajectory(t, n_states, n_actions, self.horizon)
                .map_err(|e| Error::param(alloc::format!("trajectory {i}: {e}")))?;
        }
        Ok(())
    }
}

pub(crate) fn check_trajectory(t: &Trajectory, ns: usize, na: usize, horizon: usize) -> Result<()> {
    let n = t.states.len();
    if n != horizon || t.actions.len() != n || t.rewards.len() != n {
        return Err(Error::param(alloc::format!(
            "expected {horizon} steps, found states/actions/rewards of length {}/{}/{}",
            n,
            t.actions.len(),
            t.rewards.len()
        )));
    }
    if let Some(u) = &t.confounders {
        if u.len() != n {
            return Err(Error::param("confounder labels have the wrong length"));
        }
    }
    if t.states.iter().any(|&s| s >= ns) {
        return Err(Error::param("state index out of range"));
    }
    if t.actions.iter().any(|&a| a >= na) {
        return Err(Error::param("action index out of range"));
    }
    if t.rewards.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("rewards"));
    }
    Ok(())
}

/// Simulates trajectory number `index` from its own random stream.
pub fn simulate_one(mdp: &ConfoundedMdp, pi_b: &Policy, seed: u64, index: u64) -> Trajectory {
    let mut rng = Stream::new(seed, index);
    let (nu, na, hz) = (mdp.n_confounders(), mdp.n_actions(), mdp.horizon());
    let init = mdp.initial_joint();
    let k = rng.categorical(&init);
    let (mut s, mut u) = (k / nu, k % nu);
    let mut t = Trajectory {
        states: Vec::with_capacity(hz),
        actions: Vec::with_capacity(hz),
        rewards: Vec::with_capacity(hz),
        confounders: Some(Vec::with_capacity(hz)),
    };
    for h in 0..hz {
        let a = rng.categorical(pi_b.probs(h, s, u));
        t.states.push(s);
        t.actions.push(a);
        t.rewards.push(mdp.reward(s, a));
        t.confounders.as_mut().unwrap().push(u);
        if h + 1 == hz {
            break;
        }
        let s2 = rng.categorical(mdp.kernel_row(h, s, u, a));
        u = match mdp.process() {
            ConfounderProcess::Memoryless(_) => rng.categorical(mdp.memoryless_row(h + 1, s2).unwrap()),
            ConfounderProcess::Global(_) => u,
            ConfounderProcess::HistoryDeterministic { next, .. } => next[u * na + a],
        };
        s = s2;
    }
    t
}

/// Simulates `n` trajectories sequentially; trajectory `i` uses stream `i`.
pub fn simulate(mdp: &ConfoundedMdp, pi_b: &Policy, n: usize, seed: u64) -> Result<Vec<Trajectory>> {
    pi_b.check_dims(mdp.n_states(), mdp.n_confounders(), mdp.n_actions(), mdp.horizon())?;
    Ok((0..n as u64).map(|i| simulate_one(mdp, pi_b, seed, i)).collect())
}

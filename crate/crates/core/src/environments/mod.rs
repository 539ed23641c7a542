//! Experiment environments and the adversarial constructions, each bundled
//! with its policies and the quantities that are known in closed form.
//!
//! Every constructor recomputes its `known` entries with the exact oracles
//! in [`crate::mdp`] and fails if they disagree.

mod alternating;
mod gridworld;
mod hypercube;
mod memory_chain;
mod mixture;
mod sepsis;
mod thm1;

pub use alternating::alternating_pair;
pub use gridworld::{greedy_action, gridworld_iid, GridworldParams, GOAL as GRID_GOAL, REPORT_STATE};
pub use hypercube::{hypercube_corners, hypercube_pair};
pub use memory_chain::memory_chain;
pub use mixture::{regime_horizon, two_mixture, MixtureParams, RISKY, SAFE};
pub use sepsis::{separating_pair, sepsis_toy, SepsisParams};
pub use thm1::thm1_pair;

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mdp::{ConfoundedMdp, ObservedPolicy, Policy};

/// An MDP together with the behavior policy that generated its data.
#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub mdp: ConfoundedMdp,
    pub behavior: Policy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixtureBundle {
    pub id: &'static str,
    pub members: Vec<Member>,
    pub evaluation: ObservedPolicy,
    /// Start distribution the `known` values refer to.
    pub start: Vec<f64>,
    pub known: Vec<(String, f64)>,
    /// For environments clustered on part of the state only: maps each
    /// state to the index it is clustered under.
    pub cluster_view: Option<Vec<usize>>,
}

impl FixtureBundle {
    pub fn known(&self, name: &str) -> Option<f64> {
        self.known.iter().find(|(k, _)| k == name).map(|(_, v)| *v)
    }

    pub fn mdp(&self) -> &ConfoundedMdp {
        &self.members[0].mdp
    }

    pub fn behavior(&self) -> &Policy {
        &self.members[0].behavior
    }

    pub fn reward_range(&self) -> f64 {
        let r = self.mdp().rewards();
        let hi = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
        hi - lo
    }
}

pub(crate) struct Known(Vec<(String, f64)>);

impl Known {
    pub fn new() -> Self {
        Known(Vec::new())
    }

    /// Records `stated` after checking it against `computed`.
    pub fn check(&mut self, name: &str, stated: f64, computed: f64, tol: f64) -> Result<()> {
        let ok = if stated.is_infinite() || computed.is_infinite() {
            stated == computed
        } else {
            (stated - computed).abs() <= tol * (1.0 + stated.abs())
        };
        if !ok {
            return Err(Error::KnownMismatch {
                name: name.into(),
                stated,
                computed,
            });
        }
        self.0.push((name.into(), stated));
        Ok(())
    }

    /// Records an upper bound after checking `computed <= bound`.
    pub fn check_at_most(&mut self, name: &str, bound: f64, computed: f64) -> Result<()> {
        if computed > bound {
            return Err(Error::KnownMismatch {
                name: name.into(),
                stated: bound,
                computed,
            });
        }
        self.0.push((name.into(), bound));
        Ok(())
    }

    pub fn into_inner(self) -> Vec<(String, f64)> {
        self.0
    }
}

pub(crate) fn prob(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(alloc::format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

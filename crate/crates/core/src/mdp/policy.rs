use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::table::{check_rows, StageTable};

/// A policy that only sees the observed state: `pi_h(a | s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedPolicy {
    n_states: usize,
    n_actions: usize,
    table: StageTable,
}

impl ObservedPolicy {
    pub fn new(n_states: usize, n_actions: usize, table: StageTable) -> Result<Self> {
        if table.stride() != n_states * n_actions {
            return Err(Error::Dimension {
                what: "policy table",
                expected: n_states * n_actions,
                found: table.stride(),
            });
        }
        check_rows("policy", table.data(), n_actions)?;
        Ok(ObservedPolicy {
            n_states,
            n_actions,
            table,
        })
    }

    pub fn stationary(n_states: usize, n_actions: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(n_states, n_actions, StageTable::new(1, n_states * n_actions, data)?)
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / n_actions as f64;
        ObservedPolicy {
            n_states,
            n_actions,
            table: StageTable::new(1, n_states * n_actions, vec![p; n_states * n_actions]).expect("consistent sizes"),
        }
    }

    /// Always plays `actions[s]` in state `s`.
    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        let ns = actions.len();
        let mut data = vec![0.0; ns * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::param("action index out of range"));
            }
            data[s * n_actions + a] = 1.0;
        }
        Self::stationary(ns, n_actions, data)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
    pub fn table(&self) -> &StageTable {
        &self.table
    }

    #[inline]
    pub fn probs(&self, h: usize, s: usize) -> &[f64] {
        let a = self.n_actions;
        &self.table.stage(h)[s * a..(s + 1) * a]
    }

    #[inline]
    pub fn prob(&self, h: usize, s: usize, a: usize) -> f64 {
        self.probs(h, s)[a]
    }
}

/// A behavior policy that also sees the confounder: `pi_h(a | s, u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfoundedPolicy {
    n_states: usize,
    n_confounders: usize,
    n_actions: usize,
    table: StageTable,
}

impl ConfoundedPolicy {
    /// `table` is laid out `[s][u][a]` per stage.
    pub fn new(n_states: usize, n_confounders: usize, n_actions: usize, table: StageTable) -> Result<Self> {
        let stride = n_states * n_confounders * n_actions;
        if table.stride() != stride {
            return Err(Error::Dimension {
                what: "confounded policy table",
                expected: stride,
                found: table.stride(),
            });
        }
        check_rows("confounded policy", table.data(), n_actions)?;
        Ok(ConfoundedPolicy {
            n_states,
            n_confounders,
            n_actions,
            table,
        })
    }

    pub fn stationary(n_states: usize, n_confounders: usize, n_actions: usize, data: Vec<f64>) -> Result<Self> {
        let stride = n_states * n_confounders * n_actions;
        Self::new(n_states, n_confounders, n_actions, StageTable::new(1, stride, data)?)
    }

    pub fn n_confounders(&self) -> usize {
        self.n_confounders
    }
    pub fn table(&self) -> &StageTable {
        &self.table
    }

    #[inline]
    pub fn probs(&self, h: usize, s: usize, u: usize) -> &[f64] {
        let a = self.n_actions;
        let off = (s * self.n_confounders + u) * a;
        &self.table.stage(h)[off..off + a]
    }
}

/// Tabular softmax policy `pi(a | s) ∝ exp(theta[s][a])`.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxPolicy {
    logits: Vec<f64>,
    probs: ObservedPolicy,
}

impl SoftmaxPolicy {
    pub fn new(n_states: usize, n_actions: usize, logits: Vec<f64>) -> Result<Self> {
        if logits.len() != n_states * n_actions {
            return Err(Error::Dimension {
                what: "logits",
                expected: n_states * n_actions,
                found: logits.len(),
            });
        }
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("logits"));
        }
        let mut p = vec![0.0; logits.len()];
        for (row, out) in logits.chunks(n_actions).zip(p.chunks_mut(n_actions)) {
            softmax_into(row, out);
        }
        Ok(SoftmaxPolicy {
            logits,
            probs: ObservedPolicy {
                n_states,
                n_actions,
                table: StageTable::new(1, n_states * n_actions, p)?,
            },
        })
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn policy(&self) -> &ObservedPolicy {
        &self.probs
    }
}

/// Numerically stable softmax of `x` into `out`.
pub fn softmax_into(x: &[f64], out: &mut [f64]) {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, &v) in out.iter_mut().zip(x) {
        *o = (v - m).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Policy {
    Observed(ObservedPolicy),
    Confounded(ConfoundedPolicy),
    Softmax(SoftmaxPolicy),
}

impl Policy {
    #[inline]
    pub fn probs(&self, h: usize, s: usize, u: usize) -> &[f64] {
        match self {
            Policy::Observed(p) => p.probs(h, s),
            Policy::Softmax(p) => p.probs.probs(h, s),
            Policy::Confounded(p) => p.probs(h, s, u),
        }
    }

    pub fn as_observed(&self) -> Option<&ObservedPolicy> {
        match self {
            Policy::Observed(p) => Some(p),
            Policy::Softmax(p) => Some(&p.probs),
            Policy::Confounded(_) => None,
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            Policy::Observed(p) => p.n_actions,
            Policy::Softmax(p) => p.probs.n_actions,
            Policy::Confounded(p) => p.n_actions,
        }
    }

    pub fn n_states(&self) -> usize {
        match self {
            Policy::Observed(p) => p.n_states,
            Policy::Softmax(p) => p.probs.n_states,
            Policy::Confounded(p) => p.n_states,
        }
    }

    pub fn n_stages(&self) -> usize {
        match self {
            Policy::Observed(p) => p.table.stages(),
            Policy::Softmax(_) => 1,
            Policy::Confounded(p) => p.table.stages(),
        }
    }

    /// Checks that the policy fits an MDP with the given sizes.
    pub fn check_dims(&self, n_states: usize, n_confounders: usize, n_actions: usize, horizon: usize) -> Result<()> {
        if self.n_states() != n_states || self.n_actions() != n_actions {
            return Err(Error::param("policy dimensions do not match the MDP"));
        }
        if let Policy::Confounded(p) = self {
            if p.n_confounders != n_confounders {
                return Err(Error::param("policy confounder count does not match the MDP"));
            }
        }
        let st = self.n_stages();
        if st != 1 && st < horizon {
            return Err(Error::param("per-step policy is shorter than the horizon"));
        }
        Ok(())
    }
}

impl From<ObservedPolicy> for Policy {
    fn from(p: ObservedPolicy) -> Self {
        Policy::Observed(p)
    }
}

impl From<ConfoundedPolicy> for Policy {
    fn from(p: ConfoundedPolicy) -> Self {
        Policy::Confounded(p)
    }
}

impl From<SoftmaxPolicy> for Policy {
    fn from(p: SoftmaxPolicy) -> Self {
        Policy::Softmax(p)
    }
}

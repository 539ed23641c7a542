//! Confounded tabular MDPs, policies and exact dynamic-programming routines.

mod exact;
mod mixing;
mod policy;

pub use exact::{
    evaluate, exact_value, joint_occupancy, joint_values, marginalize_behavior, marginalized_kernel, observed_law,
    occupancies, realized_gamma, trajectory_law, Backup, ExactValue, JointValues, ObservedLaw, OccupancyReport,
};
pub use mixing::{mixing_time, mixing_time_max, Mixing, NoMixing};
pub use policy::{softmax_into, ConfoundedPolicy, ObservedPolicy, Policy, SoftmaxPolicy};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::table::{check_rows, StageTable};

/// How the hidden confounder evolves.
#[derive(Clone, Debug, PartialEq)]
pub enum ConfounderProcess {
    /// Fresh draw from `P_h(u | s)` at every step; table laid out `[s][u]`.
    Memoryless(StageTable),
    /// One draw per trajectory from a prior over `u`.
    Global(Vec<f64>),
    /// `u` is a deterministic function of the action history:
    /// `u_{h+1} = next[u_h * A + a_h]`.
    HistoryDeterministic { initial: usize, next: Vec<usize> },
}

impl ConfounderProcess {
    pub fn kind(&self) -> &'static str {
        match self {
            ConfounderProcess::Memoryless(_) => "memoryless",
            ConfounderProcess::Global(_) => "global",
            ConfounderProcess::HistoryDeterministic { .. } => "history",
        }
    }
}

/// Distribution of the first state, optionally jointly with the confounder.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialDist {
    /// Over states; the first confounder comes from the process.
    States(Vec<f64>),
    /// Over `(s, u)` pairs, laid out `[s][u]`.
    Joint(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfoundedMdp {
    n_states: usize,
    n_confounders: usize,
    n_actions: usize,
    horizon: usize,
    kernel: StageTable,
    reward: Vec<f64>,
    process: ConfounderProcess,
    initial: InitialDist,
}

impl ConfoundedMdp {
    /// `kernel` is laid out `[h][s][u][a][s']` (a single slab when stationary)
    /// and `reward` is `[s][a]`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_states: usize,
        n_confounders: usize,
        n_actions: usize,
        horizon: usize,
        kernel: StageTable,
        reward: Vec<f64>,
        process: ConfounderProcess,
        initial: InitialDist,
    ) -> Result<Self> {
        let (s, u, a) = (n_states, n_confounders, n_actions);
        if s == 0 || u == 0 || a == 0 || horizon == 0 {
            return Err(Error::param("S, U, A and H must all be positive"));
        }
        let stride = s * u * a * s;
        if kernel.stride() != stride {
            return Err(Error::Dimension {
                what: "kernel",
                expected: stride,
                found: kernel.stride(),
            });
        }
        if !kernel.stationary() && kernel.stages() != horizon {
            return Err(Error::Dimension {
                what: "kernel stages",
                expected: horizon,
                found: kernel.stages(),
            });
        }
        check_rows("kernel", kernel.data(), s)?;
        if reward.len() != s * a {
            return Err(Error::Dimension {
                what: "reward",
                expected: s * a,
                found: reward.len(),
            });
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("reward"));
        }
        match &process {
            ConfounderProcess::Memoryless(t) => {
                if t.stride() != s * u {
                    return Err(Error::Dimension {
                        what: "memoryless confounder table",
                        expected: s * u,
                        found: t.stride(),
                    });
                }
                if !t.stationary() && t.stages() != horizon {
                    return Err(Error::Dimension {
                        what: "memoryless confounder stages",
                        expected: horizon,
                        found: t.stages(),
                    });
                }
                check_rows("confounder table", t.data(), u)?;
            }
            ConfounderProcess::Global(p) => {
                if p.len() != u {
                    return Err(Error::Dimension {
                        what: "confounder prior",
                        expected: u,
                        found: p.len(),
                    });
                }
                check_rows("confounder prior", p, u)?;
            }
            ConfounderProcess::HistoryDeterministic { initial, next } => {
                if next.len() != u * a {
                    return Err(Error::Dimension {
                        what: "confounder update",
                        expected: u * a,
                        found: next.len(),
                    });
                }
                if *initial >= u || next.iter().any(|&v| v >= u) {
                    return Err(Error::param("confounder index out of range"));
                }
            }
        }
        match &initial {
            InitialDist::States(d) => {
                if d.len() != s {
                    return Err(Error::Dimension {
                        what: "initial distribution",
                        expected: s,
                        found: d.len(),
                    });
                }
                check_rows("initial distribution", d, s)?;
            }
            InitialDist::Joint(d) => {
                if d.len() != s * u {
                    return Err(Error::Dimension {
                        what: "joint initial distribution",
                        expected: s * u,
                        found: d.len(),
                    });
                }
                check_rows("joint initial distribution", d, s * u)?;
            }
        }
        Ok(ConfoundedMdp {
            n_states,
            n_confounders,
            n_actions,
            horizon,
            kernel,
            reward,
            process,
            initial,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }
    pub fn n_confounders(&self) -> usize {
        self.n_confounders
    }
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn kernel(&self) -> &StageTable {
        &self.kernel
    }
    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }
    pub fn process(&self) -> &ConfounderProcess {
        &self.process
    }
    pub fn initial(&self) -> &InitialDist {
        &self.initial
    }

    pub fn stationary(&self) -> bool {
        self.kernel.stationary()
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    /// `P_h(. | s, u, a)`; `h` is zero-based.
    #[inline]
    pub fn kernel_row(&self, h: usize, s: usize, u: usize, a: usize) -> &[f64] {
        let n = self.n_states;
        let off = ((s * self.n_confounders + u) * self.n_actions + a) * n;
        &self.kernel.stage(h)[off..off + n]
    }

    /// Same MDP with a different horizon. Per-step tables must already cover it.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        let mut m = self.clone();
        m.horizon = horizon;
        ConfoundedMdp::new(
            m.n_states,
            m.n_confounders,
            m.n_actions,
            horizon,
            m.kernel,
            m.reward,
            m.process,
            m.initial,
        )
    }

    /// Same MDP started from a different initial distribution.
    pub fn with_initial(&self, initial: InitialDist) -> Result<Self> {
        let m = self.clone();
        ConfoundedMdp::new(
            m.n_states,
            m.n_confounders,
            m.n_actions,
            m.horizon,
            m.kernel,
            m.reward,
            m.process,
            initial,
        )
    }

    /// `d_1(s, u)` laid out `[s][u]`.
    pub fn initial_joint(&self) -> Vec<f64> {
        let (ns, nu) = (self.n_states, self.n_confounders);
        match &self.initial {
            InitialDist::Joint(d) => d.clone(),
            InitialDist::States(d) => {
                let mut out = vec![0.0; ns * nu];
                for s in 0..ns {
                    for u in 0..nu {
                        out[s * nu + u] = d[s] * self.first_confounder(s, u);
                    }
                }
                out
            }
        }
    }

    /// Marginal initial state distribution.
    pub fn initial_states(&self) -> Vec<f64> {
        let nu = self.n_confounders;
        self.initial_joint().chunks(nu).map(|c| c.iter().sum()).collect()
    }

    /// Probability of `u_1 = u` given `s_1 = s` when the initial law is over
    /// states only.
    fn first_confounder(&self, s: usize, u: usize) -> f64 {
        match &self.process {
            ConfounderProcess::Memoryless(t) => t.stage(0)[s * self.n_confounders + u],
            ConfounderProcess::Global(p) => p[u],
            ConfounderProcess::HistoryDeterministic { initial, .. } => {
                if u == *initial {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `P(u_1 | s_1 = s)`, falling back to the process rule where `d_1(s) = 0`.
    pub fn initial_conditional(&self, s: usize) -> Vec<f64> {
        let nu = self.n_confounders;
        if let InitialDist::Joint(d) = &self.initial {
            let row = &d[s * nu..(s + 1) * nu];
            let z: f64 = row.iter().sum();
            if z > 0.0 {
                return row.iter().map(|x| x / z).collect();
            }
        }
        (0..nu).map(|u| self.first_confounder(s, u)).collect()
    }

    /// `P_h(u | s)` for a memoryless process.
    pub fn memoryless_row(&self, h: usize, s: usize) -> Option<&[f64]> {
        match &self.process {
            ConfounderProcess::Memoryless(t) => {
                let nu = self.n_confounders;
                Some(&t.stage(h)[s * nu..(s + 1) * nu])
            }
            _ => None,
        }
    }

    /// The ordinary MDP obtained by fixing the confounder to `u`.
    pub fn conditional_kernel(&self, u: usize) -> StageTable {
        let (ns, na) = (self.n_states, self.n_actions);
        let stages = self.kernel.stages();
        let mut out = StageTable::zeros(stages, ns * na * ns);
        for k in 0..stages {
            let dst = out.stage_mut(k);
            for s in 0..ns {
                for a in 0..na {
                    let row = self.kernel_row(k, s, u, a);
                    dst[(s * na + a) * ns..(s * na + a + 1) * ns].copy_from_slice(row);
                }
            }
        }
        out
    }
}

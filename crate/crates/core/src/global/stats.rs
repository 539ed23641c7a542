use alloc::vec;
use alloc::vec::Vec;

use crate::data::Trajectory;
use crate::error::{Error, Result};

/// Per-trajectory counts pooled over time, optionally after mapping states
/// through a projection `view` (hidden coordinates dropped).
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryStats {
    /// Size of the (projected) state space.
    pub n_states: usize,
    pub n_actions: usize,
    /// `[s][a][s']` transition counts per trajectory.
    pub transitions: Vec<Vec<u32>>,
    /// `[s][a]` action counts per trajectory, all steps.
    pub actions: Vec<Vec<u32>>,
}

impl TrajectoryStats {
    pub fn new(trajs: &[Trajectory], n_states: usize, n_actions: usize, view: Option<&[usize]>) -> Result<Self> {
        let (map, nv): (Vec<usize>, usize) = match view {
            Some(v) => {
                if v.len() != n_states {
                    return Err(Error::Dimension {
                        what: "cluster view",
                        expected: n_states,
                        found: v.len(),
                    });
                }
                (v.to_vec(), v.iter().max().map_or(0, |m| m + 1))
            }
            None => ((0..n_states).collect(), n_states),
        };
        let na = n_actions;
        let mut transitions = Vec::with_capacity(trajs.len());
        let mut actions = Vec::with_capacity(trajs.len());
        for (i, t) in trajs.iter().enumerate() {
            if t.actions.len() != t.states.len()
                || t.states.iter().any(|&s| s >= n_states)
                || t.actions.iter().any(|&a| a >= na)
            {
                return Err(Error::param(alloc::format!("trajectory {i} is malformed")));
            }
            let mut tr = vec![0u32; nv * na * nv];
            let mut ac = vec![0u32; nv * na];
            for k in 0..t.states.len() {
                let (s, a) = (map[t.states[k]], t.actions[k]);
                ac[s * na + a] += 1;
                if k + 1 < t.states.len() {
                    tr[(s * na + a) * nv + map[t.states[k + 1]]] += 1;
                }
            }
            transitions.push(tr);
            actions.push(ac);
        }
        Ok(TrajectoryStats {
            n_states: nv,
            n_actions: na,
            transitions,
            actions,
        })
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn n_cells(&self) -> usize {
        self.n_states * self.n_actions
    }

    /// Transitions observed out of cell `sa` in trajectory `i`.
    pub fn cell_count(&self, i: usize, sa: usize) -> u32 {
        let ns = self.n_states;
        self.transitions[i][sa * ns..(sa + 1) * ns].iter().sum()
    }

    /// Empirical next-state row of cell `sa`, if visited.
    pub fn row(&self, i: usize, sa: usize) -> Option<Vec<f64>> {
        let ns = self.n_states;
        let c = &self.transitions[i][sa * ns..(sa + 1) * ns];
        let n: u32 = c.iter().sum();
        (n > 0).then(|| c.iter().map(|&x| x as f64 / n as f64).collect())
    }
}

/// Smoothed per-cluster model of the chain on `(s, a)`: behavior and
/// transitions, in log space.
pub(crate) struct ClusterModel {
    pub log_pi: Vec<f64>,
    pub log_p: Vec<f64>,
}

impl ClusterModel {
    /// `weights[i]` is how much trajectory `i` belongs to the cluster.
    pub fn fit(st: &TrajectoryStats, weights: &[f64], pseudo: f64) -> Self {
        let (ns, na) = (st.n_states, st.n_actions);
        let mut ac = vec![pseudo; ns * na];
        let mut tr = vec![pseudo; ns * na * ns];
        for (i, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (x, &c) in ac.iter_mut().zip(&st.actions[i]) {
                *x += w * c as f64;
            }
            for (x, &c) in tr.iter_mut().zip(&st.transitions[i]) {
                *x += w * c as f64;
            }
        }
        ClusterModel {
            log_pi: log_normalize(&ac, na),
            log_p: log_normalize(&tr, ns),
        }
    }

    pub fn log_likelihood(&self, st: &TrajectoryStats, i: usize) -> f64 {
        let mut ll = 0.0;
        for (&c, &lp) in st.actions[i].iter().zip(&self.log_pi) {
            if c > 0 {
                ll += c as f64 * lp;
            }
        }
        for (&c, &lp) in st.transitions[i].iter().zip(&self.log_p) {
            if c > 0 {
                ll += c as f64 * lp;
            }
        }
        ll
    }

    /// Log density of the symmetric Dirichlet prior matching `pseudo`
    /// pseudo-counts, up to a constant.
    pub fn log_prior(&self, pseudo: f64) -> f64 {
        pseudo * (self.log_pi.iter().sum::<f64>() + self.log_p.iter().sum::<f64>())
    }
}

fn log_normalize(counts: &[f64], width: usize) -> Vec<f64> {
    let mut out = vec![0.0; counts.len()];
    for (row, o) in counts.chunks(width).zip(out.chunks_mut(width)) {
        let n: f64 = row.iter().sum();
        for (x, y) in row.iter().zip(o) {
            *y = if n > 0.0 && *x > 0.0 {
                libm_ln(*x / n)
            } else if n > 0.0 {
                f64::NEG_INFINITY
            } else {
                -libm_ln(width as f64)
            };
        }
    }
    out
}

#[inline]
pub(crate) fn libm_ln(x: f64) -> f64 {
    num_traits::Float::ln(x)
}

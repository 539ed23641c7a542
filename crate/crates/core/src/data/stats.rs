use alloc::vec;
use alloc::vec::Vec;

use super::{check_trajectory, Mode, Trajectory};
use crate::error::{Error, Result};

/// Visit counts per step. Transition counts only cover steps `1..H-1`,
/// because the state after the last step is never observed.
#[derive(Clone, Debug, PartialEq)]
pub struct CountStats {
    pub n_states: usize,
    pub n_actions: usize,
    pub horizon: usize,
    pub n_trajectories: usize,
    /// `N_h(s)`, `[h][s]`.
    pub state: Vec<f64>,
    /// `N_h(s, a)`, `[h][s][a]`.
    pub sa: Vec<f64>,
    /// `N_h(s, a, s')`, `[h][s][a][s']`; the last step is all zero.
    pub sas: Vec<f64>,
    pub reward_sum: Vec<f64>,
    pub reward_n: Vec<f64>,
}

pub fn count_stats(trajs: &[Trajectory], n_states: usize, n_actions: usize, horizon: usize) -> Result<CountStats> {
    let (ns, na, hz) = (n_states, n_actions, horizon);
    let mut c = CountStats {
        n_states: ns,
        n_actions: na,
        horizon: hz,
        n_trajectories: trajs.len(),
        state: vec![0.0; hz * ns],
        sa: vec![0.0; hz * ns * na],
        sas: vec![0.0; hz * ns * na * ns],
        reward_sum: vec![0.0; ns * na],
        reward_n: vec![0.0; ns * na],
    };
    for t in trajs {
        check_trajectory(t, ns, na, hz)?;
        for h in 0..hz {
            let (s, a) = (t.states[h], t.actions[h]);
            c.state[h * ns + s] += 1.0;
            c.sa[(h * ns + s) * na + a] += 1.0;
            c.reward_sum[s * na + a] += t.rewards[h];
            c.reward_n[s * na + a] += 1.0;
            if h + 1 < hz {
                c.sas[((h * ns + s) * na + a) * ns + t.states[h + 1]] += 1.0;
            }
        }
    }
    Ok(c)
}

impl CountStats {
    /// `N(s)` summed over all steps.
    pub fn pooled_state(&self) -> Vec<f64> {
        sum_rows(&self.state, self.horizon)
    }

    /// `N(s, a)` summed over all steps.
    pub fn pooled_sa(&self) -> Vec<f64> {
        sum_rows(&self.sa, self.horizon)
    }

    /// `N(s, a, s')` summed over steps.
    pub fn pooled_sas(&self) -> Vec<f64> {
        sum_rows(&self.sas, self.horizon)
    }

    /// `sum_{s'} N(s, a, s')`, the denominators of transition estimates.
    pub fn transition_totals(sas: &[f64], n_states: usize) -> Vec<f64> {
        sas.chunks(n_states).map(|c| c.iter().sum()).collect()
    }
}

fn sum_rows(x: &[f64], stages: usize) -> Vec<f64> {
    let stride = x.len() / stages;
    let mut out = vec![0.0; stride];
    for chunk in x.chunks(stride) {
        for (o, v) in out.iter_mut().zip(chunk) {
            *o += v;
        }
    }
    out
}

/// Effective sample size `-log mean exp(-N)` over the positive counts.
pub fn n_star(counts: &[f64]) -> f64 {
    let pos: Vec<f64> = counts.iter().copied().filter(|&c| c > 0.0).collect();
    if pos.is_empty() {
        return 0.0;
    }
    let m = pos.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = pos.iter().map(|&c| (-(c - m)).exp()).sum::<f64>() / pos.len() as f64;
    m - mean.ln()
}

/// Concentration widths for the behavior policy (per state) and the
/// transition rows (per state-action pair). Unvisited cells get infinity.
#[derive(Clone, Debug, PartialEq)]
pub struct HoeffdingWidths {
    pub mode: Mode,
    pub delta_pi: Vec<f64>,
    pub delta_p: Vec<f64>,
    pub n_star_s: f64,
    pub n_star_sa: f64,
}

impl HoeffdingWidths {
    pub fn pi(&self, h: usize, s: usize, n_states: usize) -> f64 {
        let k = if self.mode == Mode::Pooled { 0 } else { h };
        self.delta_pi[k * n_states + s]
    }

    pub fn p(&self, h: usize, s: usize, a: usize, n_states: usize, n_actions: usize) -> f64 {
        let k = if self.mode == Mode::Pooled { 0 } else { h };
        self.delta_p[(k * n_states + s) * n_actions + a]
    }
}

pub fn hoeffding_widths(cs: &CountStats, mode: Mode, delta1: f64, delta2: f64) -> Result<HoeffdingWidths> {
    if !(delta1 > 0.0 && delta1 < 1.0 && delta2 > 0.0 && delta2 < 1.0) {
        return Err(Error::param("confidence levels must lie in (0, 1)"));
    }
    let (ns, na) = (cs.n_states as f64, cs.n_actions as f64);
    let (n_s, n_sa) = match mode {
        Mode::Pooled => (
            cs.pooled_state(),
            CountStats::transition_totals(&cs.pooled_sas(), cs.n_states),
        ),
        Mode::PerStep => (cs.state.clone(), CountStats::transition_totals(&cs.sas, cs.n_states)),
    };
    let n_star_s = n_star(&n_s);
    let n_star_sa = n_star(&n_sa);
    let w_pi = ((2.0 * ns * na / delta1).ln() / (2.0 * n_star_s)).sqrt();
    let w_p = ((2.0 * ns * ns * na / delta2).ln() / (2.0 * n_star_sa)).sqrt();
    let widen = |counts: &[f64], w: f64| -> Vec<f64> {
        counts
            .iter()
            .map(|&c| if c > 0.0 { w } else { f64::INFINITY })
            .collect()
    };
    Ok(HoeffdingWidths {
        mode,
        delta_pi: widen(&n_s, w_pi),
        delta_p: widen(&n_sa, w_p),
        n_star_s,
        n_star_sa,
    })
}

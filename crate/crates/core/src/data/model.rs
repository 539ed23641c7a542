use alloc::vec;
use alloc::vec::Vec;

use super::CountStats;
use crate::error::{Cell, Error, Result};
use crate::mdp::{observed_law, ConfoundedMdp, ObservedLaw, Policy};
use crate::table::StageTable;

/// Whether estimates are kept separately per step or pooled over steps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    PerStep,
    Pooled,
}

/// Observed-law estimates: `pi_b(a | s)`, `P(s' | s, a)` and `r(s, a)`,
/// either from counts or computed exactly from a known MDP.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalModel {
    pub n_states: usize,
    pub n_actions: usize,
    pub horizon: usize,
    pub mode: Mode,
    /// `[s][a]` per stage.
    pub pi_b: StageTable,
    /// `[s][a][s']` per stage; meaningful only where `kernel_known`.
    pub kernel: StageTable,
    pub state_known: Vec<bool>,
    pub kernel_known: Vec<bool>,
    pub reward: Vec<f64>,
    pub reward_known: Vec<bool>,
}

impl EmpiricalModel {
    pub fn from_counts(cs: &CountStats, mode: Mode) -> Self {
        let (ns, na, hz) = (cs.n_states, cs.n_actions, cs.horizon);
        let (n_s, n_sa_policy, n_sas) = match mode {
            Mode::Pooled => (cs.pooled_state(), cs.pooled_sa(), cs.pooled_sas()),
            Mode::PerStep => (cs.state.clone(), cs.sa.clone(), cs.sas.clone()),
        };
        let stages = n_s.len() / ns;
        let n_trans = CountStats::transition_totals(&n_sas, ns);
        let mut pi_b = vec![0.0; stages * ns * na];
        let mut state_known = vec![false; stages * ns];
        for i in 0..stages * ns {
            if n_s[i] > 0.0 {
                state_known[i] = true;
                for a in 0..na {
                    pi_b[i * na + a] = n_sa_policy[i * na + a] / n_s[i];
                }
            } else {
                pi_b[i * na..(i + 1) * na].iter_mut().for_each(|x| *x = 1.0 / na as f64);
            }
        }
        let mut kernel = vec![0.0; stages * ns * na * ns];
        let mut kernel_known = vec![false; stages * ns * na];
        for i in 0..stages * ns * na {
            if n_trans[i] > 0.0 {
                kernel_known[i] = true;
                for s2 in 0..ns {
                    kernel[i * ns + s2] = n_sas[i * ns + s2] / n_trans[i];
                }
            } else {
                kernel[i * ns..(i + 1) * ns]
                    .iter_mut()
                    .for_each(|x| *x = 1.0 / ns as f64);
            }
        }
        let reward = cs
            .reward_sum
            .iter()
            .zip(&cs.reward_n)
            .map(|(s, n)| if *n > 0.0 { s / n } else { 0.0 })
            .collect();
        let reward_known = cs.reward_n.iter().map(|&n| n > 0.0).collect();
        EmpiricalModel {
            n_states: ns,
            n_actions: na,
            horizon: hz,
            mode,
            pi_b: StageTable::new(stages, ns * na, pi_b).unwrap(),
            kernel: StageTable::new(stages, ns * na * ns, kernel).unwrap(),
            state_known,
            kernel_known,
            reward,
            reward_known,
        }
    }

    /// The infinite-data limit of `from_counts` for behavior data from `mdp`.
    pub fn analytic(mdp: &ConfoundedMdp, pi_b: &Policy, mode: Mode) -> Result<Self> {
        let law = observed_law(mdp, pi_b)?;
        Ok(Self::from_law(&law, mdp.rewards(), mode))
    }

    pub fn from_law(law: &ObservedLaw, reward: &[f64], mode: Mode) -> Self {
        let (ns, na, hz) = (law.n_states, law.n_actions, law.horizon);
        let reward_known = vec![true; ns * na];
        match mode {
            Mode::PerStep => {
                let state_known = (0..hz * ns).map(|i| (0..na).any(|a| law.defined[i * na + a])).collect();
                let mut kernel = law.kernel.clone();
                let mut kernel_known = law.defined.clone();
                // no transition out of the last step
                for i in (hz - 1) * ns * na..hz * ns * na {
                    kernel_known[i] = false;
                }
                fill_unknown(&mut kernel, &kernel_known, ns);
                EmpiricalModel {
                    n_states: ns,
                    n_actions: na,
                    horizon: hz,
                    mode,
                    pi_b: law.pi_b.clone(),
                    kernel,
                    state_known,
                    kernel_known,
                    reward: reward.to_vec(),
                    reward_known,
                }
            }
            Mode::Pooled => {
                let mut pi_b = vec![0.0; ns * na];
                let mut state_known = vec![false; ns];
                for s in 0..ns {
                    let occ: f64 = (0..hz).map(|h| law.state_occ[h * ns + s]).sum();
                    let defined_steps: Vec<usize> = (0..hz)
                        .filter(|&h| (0..na).any(|a| law.defined[(h * ns + s) * na + a]))
                        .collect();
                    state_known[s] = !defined_steps.is_empty();
                    for a in 0..na {
                        pi_b[s * na + a] = if occ > 0.0 {
                            (0..hz).map(|h| law.sa_occ[(h * ns + s) * na + a]).sum::<f64>() / occ
                        } else if !defined_steps.is_empty() {
                            defined_steps
                                .iter()
                                .map(|&h| law.pi_b.stage(h)[s * na + a])
                                .sum::<f64>()
                                / defined_steps.len() as f64
                        } else {
                            1.0 / na as f64
                        };
                    }
                }
                let mut kernel = vec![0.0; ns * na * ns];
                let mut kernel_known = vec![false; ns * na];
                let steps = hz.saturating_sub(1);
                for i in 0..ns * na {
                    let occ: f64 = (0..steps).map(|h| law.sa_occ[h * ns * na + i]).sum();
                    let defined: Vec<usize> = (0..steps).filter(|&h| law.defined[h * ns * na + i]).collect();
                    if defined.is_empty() {
                        continue;
                    }
                    kernel_known[i] = true;
                    let row = &mut kernel[i * ns..(i + 1) * ns];
                    for &h in &defined {
                        let w = if occ > 0.0 {
                            law.sa_occ[h * ns * na + i] / occ
                        } else {
                            1.0 / defined.len() as f64
                        };
                        if w == 0.0 {
                            continue;
                        }
                        let src = &law.kernel.stage(h)[i * ns..(i + 1) * ns];
                        for (x, &p) in row.iter_mut().zip(src) {
                            *x += w * p;
                        }
                    }
                }
                let mut kernel = StageTable::new(1, ns * na * ns, kernel).unwrap();
                fill_unknown(&mut kernel, &kernel_known, ns);
                EmpiricalModel {
                    n_states: ns,
                    n_actions: na,
                    horizon: hz,
                    mode,
                    pi_b: StageTable::new(1, ns * na, pi_b).unwrap(),
                    kernel,
                    state_known,
                    kernel_known,
                    reward: reward.to_vec(),
                    reward_known,
                }
            }
        }
    }

    #[inline]
    pub fn stage(&self, h: usize) -> usize {
        match self.mode {
            Mode::Pooled => 0,
            Mode::PerStep => h,
        }
    }

    pub fn stages(&self) -> usize {
        self.pi_b.stages()
    }

    #[inline]
    pub fn pi_b(&self, h: usize, s: usize) -> &[f64] {
        let na = self.n_actions;
        &self.pi_b.stage(self.stage(h))[s * na..(s + 1) * na]
    }

    #[inline]
    pub fn kernel_row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let (ns, na) = (self.n_states, self.n_actions);
        &self.kernel.stage(self.stage(h))[(s * na + a) * ns..(s * na + a + 1) * ns]
    }

    #[inline]
    pub fn kernel_known(&self, h: usize, s: usize, a: usize) -> bool {
        self.kernel_known[(self.stage(h) * self.n_states + s) * self.n_actions + a]
    }

    #[inline]
    pub fn state_known(&self, h: usize, s: usize) -> bool {
        self.state_known[self.stage(h) * self.n_states + s]
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn cell(&self, h: usize, s: usize, a: usize) -> Cell {
        Cell {
            step: match self.mode {
                Mode::Pooled => None,
                Mode::PerStep => Some(h),
            },
            state: s,
            action: a,
        }
    }

    pub fn check_policy(&self, n_states: usize, n_actions: usize) -> Result<()> {
        if n_states != self.n_states || n_actions != self.n_actions {
            return Err(Error::param("policy dimensions do not match the model"));
        }
        Ok(())
    }
}

fn fill_unknown(kernel: &mut StageTable, known: &[bool], ns: usize) {
    let stages = kernel.stages();
    let stride = kernel.stride();
    for k in 0..stages {
        let st = kernel.stage_mut(k);
        for i in 0..stride / ns {
            if !known[k * (stride / ns) + i] {
                st[i * ns..(i + 1) * ns].iter_mut().for_each(|x| *x = 1.0 / ns as f64);
            }
        }
    }
}

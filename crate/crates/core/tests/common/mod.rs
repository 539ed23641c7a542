#![allow(dead_code)]

use confope_core::mdp::{ConfoundedMdp, ConfoundedPolicy, ConfounderProcess, InitialDist, ObservedPolicy, Policy};
use confope_core::rng::Stream;
use confope_core::table::StageTable;

pub fn simplex(rng: &mut Stream, n: usize, floor: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| -(1.0 - rng.uniform()).ln() + floor).collect();
    let z: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= z);
    v
}

pub fn observed(rng: &mut Stream, ns: usize, na: usize) -> ObservedPolicy {
    let data: Vec<f64> = (0..ns).flat_map(|_| simplex(rng, na, 0.05)).collect();
    ObservedPolicy::stationary(ns, na, data).unwrap()
}

pub struct Inst {
    pub mdp: ConfoundedMdp,
    pub behavior: Policy,
    pub evaluation: ObservedPolicy,
}

/// Behavior is `base * exp(tilt * z)` renormalised, so `tilt = 0` gives an
/// unconfounded behavior policy.
pub fn random_instance(
    rng: &mut Stream,
    ns: usize,
    nu: usize,
    na: usize,
    horizon: usize,
    global: bool,
    tilt: f64,
) -> Inst {
    let kernel: Vec<f64> = (0..ns * nu * na).flat_map(|_| simplex(rng, ns, 0.02)).collect();
    let reward: Vec<f64> = (0..ns * na).map(|_| rng.uniform()).collect();
    let d0 = simplex(rng, ns, 0.1);
    let process = if global {
        ConfounderProcess::Global(simplex(rng, nu, 0.2))
    } else {
        let t: Vec<f64> = (0..ns).flat_map(|_| simplex(rng, nu, 0.1)).collect();
        ConfounderProcess::Memoryless(StageTable::new(1, ns * nu, t).unwrap())
    };
    let mdp = ConfoundedMdp::new(
        ns,
        nu,
        na,
        horizon,
        StageTable::new(1, ns * nu * na * ns, kernel).unwrap(),
        reward,
        process,
        InitialDist::States(d0),
    )
    .unwrap();
    let base: Vec<f64> = (0..ns).flat_map(|_| simplex(rng, na, 0.2)).collect();
    let mut p = vec![0.0; ns * nu * na];
    for s in 0..ns {
        for u in 0..nu {
            let row = &mut p[(s * nu + u) * na..(s * nu + u + 1) * na];
            for a in 0..na {
                row[a] = base[s * na + a] * (tilt * (2.0 * rng.uniform() - 1.0)).exp();
            }
            let z: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= z);
        }
    }
    let behavior = Policy::Confounded(ConfoundedPolicy::stationary(ns, nu, na, p).unwrap());
    let evaluation = observed(rng, ns, na);
    Inst {
        mdp,
        behavior,
        evaluation,
    }
}

/// Expected return by explicit recursion over every `(s, u, a)` path.
pub fn enumerate_value(mdp: &ConfoundedMdp, policy: &Policy) -> f64 {
    let (ns, nu) = (mdp.n_states(), mdp.n_confounders());
    let init = mdp.initial_joint();
    let mut total = 0.0;
    for s in 0..ns {
        for u in 0..nu {
            if init[s * nu + u] > 0.0 {
                total += init[s * nu + u] * go(mdp, policy, 0, s, u);
            }
        }
    }
    total
}

fn go(mdp: &ConfoundedMdp, policy: &Policy, h: usize, s: usize, u: usize) -> f64 {
    let (ns, nu, na) = (mdp.n_states(), mdp.n_confounders(), mdp.n_actions());
    let mut acc = 0.0;
    for a in 0..na {
        let pa = policy.probs(h, s, u)[a];
        if pa == 0.0 {
            continue;
        }
        let mut val = mdp.reward(s, a);
        if h + 1 < mdp.horizon() {
            let row = mdp.kernel_row(h, s, u, a);
            for s2 in 0..ns {
                if row[s2] == 0.0 {
                    continue;
                }
                let cont = match mdp.process() {
                    ConfounderProcess::Memoryless(_) => {
                        let pu = mdp.memoryless_row(h + 1, s2).unwrap();
                        (0..nu).map(|u2| pu[u2] * go(mdp, policy, h + 1, s2, u2)).sum()
                    }
                    ConfounderProcess::Global(_) => go(mdp, policy, h + 1, s2, u),
                    ConfounderProcess::HistoryDeterministic { next, .. } => {
                        go(mdp, policy, h + 1, s2, next[u * na + a])
                    }
                };
                val += row[s2] * cont;
            }
        }
        acc += pa * val;
    }
    acc
}

/// Minimum of `c . m` over `{lo <= m <= hi, sum m = 1}` by enumerating the
/// vertices: all coordinates but one at a bound, the free one solving the
/// budget.
pub fn lp_vertex_oracle(c: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let n = c.len();
    let mut best = f64::INFINITY;
    for free in 0..n {
        for mask in 0u32..(1 << (n - 1)) {
            let mut m = vec![0.0; n];
            let mut k = 0;
            for i in 0..n {
                if i == free {
                    continue;
                }
                m[i] = if mask >> k & 1 == 1 { hi[i] } else { lo[i] };
                k += 1;
            }
            let rest: f64 = m.iter().sum();
            m[free] = 1.0 - rest;
            if m[free] >= lo[free] - 1e-12 && m[free] <= hi[free] + 1e-12 {
                best = best.min(c.iter().zip(&m).map(|(a, b)| a * b).sum());
            }
        }
    }
    best
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

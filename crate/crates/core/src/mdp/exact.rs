use alloc::vec;
use alloc::vec::Vec;

use super::{ConfoundedMdp, ConfounderProcess, InitialDist, ObservedPolicy, Policy};
use crate::error::{Error, Result};
use crate::table::{dot, StageTable};

/// Backward-induction tables for an ordinary MDP. Row `h` of `v` is the value
/// with `H - h` steps to go, so row `H` is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Backup {
    pub horizon: usize,
    pub n_states: usize,
    pub n_actions: usize,
    pub v: Vec<f64>,
    pub q: Vec<f64>,
}

impl Backup {
    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.n_states + s]
    }
    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[(h * self.n_states + s) * self.n_actions + a]
    }
    pub fn v1(&self) -> &[f64] {
        &self.v[..self.n_states]
    }
}

/// Evaluates `pi` on the MDP with `kernel` laid out `[s][a][s']` per stage.
pub fn evaluate(reward: &[f64], kernel: &StageTable, pi: &ObservedPolicy, horizon: usize) -> Backup {
    let (ns, na) = (pi.n_states(), pi.n_actions());
    let mut v = vec![0.0; (horizon + 1) * ns];
    let mut q = vec![0.0; horizon * ns * na];
    for h in (0..horizon).rev() {
        let k = kernel.stage(h);
        let (cur, next) = v.split_at_mut((h + 1) * ns);
        let next = &next[..ns];
        for s in 0..ns {
            let p = pi.probs(h, s);
            let mut vs = 0.0;
            for a in 0..na {
                let row = &k[(s * na + a) * ns..(s * na + a + 1) * ns];
                let qa = reward[s * na + a] + dot(row, next);
                q[(h * ns + s) * na + a] = qa;
                vs += p[a] * qa;
            }
            cur[h * ns + s] = vs;
        }
    }
    Backup {
        horizon,
        n_states: ns,
        n_actions: na,
        v,
        q,
    }
}

/// Value tables on the joint `(s, u)` chain.
#[derive(Clone, Debug, PartialEq)]
pub struct JointValues {
    /// `W_h(s, u)`, rows `0..=H`, each laid out `[s][u]`.
    pub w: Vec<f64>,
    /// `V_1(s)` with `u_1` drawn from its conditional given `s_1 = s`.
    pub v1: Vec<f64>,
    /// Expected return under the initial distribution.
    pub start: f64,
}

/// Dynamic programming over `(s, u)`; works for every process and for
/// confounder-aware policies.
pub fn joint_values(mdp: &ConfoundedMdp, policy: &Policy) -> Result<JointValues> {
    let (ns, nu, na, hz) = dims(mdp);
    policy.check_dims(ns, nu, na, hz)?;
    let su = ns * nu;
    let mut w = vec![0.0; (hz + 1) * su];
    let mut cont = vec![0.0; su];
    for h in (0..hz).rev() {
        let (cur, next) = w.split_at_mut((h + 1) * su);
        let next = &next[..su];
        // Memoryless: continuation is averaged over the fresh draw at h + 1.
        if let ConfounderProcess::Memoryless(_) = mdp.process() {
            if h + 1 < hz {
                for s2 in 0..ns {
                    let pu = mdp.memoryless_row(h + 1, s2).unwrap();
                    let c = dot(pu, &next[s2 * nu..(s2 + 1) * nu]);
                    for u2 in 0..nu {
                        cont[s2 * nu + u2] = c;
                    }
                }
            } else {
                cont.iter_mut().for_each(|x| *x = 0.0);
            }
        }
        for s in 0..ns {
            for u in 0..nu {
                let p = policy.probs(h, s, u);
                let mut acc = 0.0;
                for a in 0..na {
                    if p[a] == 0.0 {
                        continue;
                    }
                    let row = mdp.kernel_row(h, s, u, a);
                    let future: f64 = match mdp.process() {
                        ConfounderProcess::Memoryless(_) => (0..ns).map(|s2| row[s2] * cont[s2 * nu]).sum(),
                        ConfounderProcess::Global(_) => (0..ns).map(|s2| row[s2] * next[s2 * nu + u]).sum(),
                        ConfounderProcess::HistoryDeterministic { next: nx, .. } => {
                            let u2 = nx[u * na + a];
                            (0..ns).map(|s2| row[s2] * next[s2 * nu + u2]).sum()
                        }
                    };
                    acc += p[a] * (mdp.reward(s, a) + future);
                }
                cur[h * su + s * nu + u] = acc;
            }
        }
    }
    let v1 = (0..ns)
        .map(|s| dot(&mdp.initial_conditional(s), &w[s * nu..(s + 1) * nu]))
        .collect();
    let start = dot(&mdp.initial_joint(), &w[..su]);
    Ok(JointValues { w, v1, start })
}

fn dims(mdp: &ConfoundedMdp) -> (usize, usize, usize, usize) {
    (mdp.n_states(), mdp.n_confounders(), mdp.n_actions(), mdp.horizon())
}

/// Exact value of an observed-state policy.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactValue {
    pub v1: Vec<f64>,
    pub start: f64,
    /// `V_h(s)` rows `0..=H`; only for memoryless confounding, where it is
    /// well defined without conditioning on the past.
    pub per_step: Option<Vec<f64>>,
}

/// Memoryless: backup on the marginalised kernel. Global: one backup per
/// confounder value, mixed by the prior. History-dependent: the joint chain.
pub fn exact_value(mdp: &ConfoundedMdp, pi_e: &ObservedPolicy) -> Result<ExactValue> {
    let (ns, nu, na, hz) = dims(mdp);
    let pol = Policy::Observed(pi_e.clone());
    pol.check_dims(ns, nu, na, hz)?;
    match (mdp.process(), mdp.initial()) {
        (ConfounderProcess::Memoryless(_), InitialDist::States(d0)) => {
            let k = marginalized_kernel(mdp)?;
            let b = evaluate(mdp.rewards(), &k, pi_e, hz);
            let v1 = b.v1().to_vec();
            let start = dot(d0, &v1);
            Ok(ExactValue {
                v1,
                start,
                per_step: Some(b.v),
            })
        }
        (ConfounderProcess::Global(_), _) => {
            let joint = mdp.initial_joint();
            let mut v1 = vec![0.0; ns];
            let mut start = 0.0;
            let conds: Vec<Vec<f64>> = (0..ns).map(|s| mdp.initial_conditional(s)).collect();
            for u in 0..nu {
                let b = evaluate(mdp.rewards(), &mdp.conditional_kernel(u), pi_e, hz);
                for s in 0..ns {
                    v1[s] += conds[s][u] * b.v(0, s);
                    start += joint[s * nu + u] * b.v(0, s);
                }
            }
            Ok(ExactValue {
                v1,
                start,
                per_step: None,
            })
        }
        _ => {
            let j = joint_values(mdp, &pol)?;
            Ok(ExactValue {
                v1: j.v1,
                start: j.start,
                per_step: None,
            })
        }
    }
}

/// `P_h(s' | s, a) = sum_u P_h(u | s) P_h(s' | s, u, a)`, laid out `[s][a][s']`.
pub fn marginalized_kernel(mdp: &ConfoundedMdp) -> Result<StageTable> {
    let (ns, nu, na, hz) = dims(mdp);
    let table = match mdp.process() {
        ConfounderProcess::Memoryless(t) => t,
        _ => return Err(Error::UnsupportedProcess { required: "memoryless" }),
    };
    let stages = if mdp.stationary() && table.stationary() { 1 } else { hz };
    let mut out = StageTable::zeros(stages, ns * na * ns);
    for k in 0..stages {
        let dst = out.stage_mut(k);
        for s in 0..ns {
            let pu = mdp.memoryless_row(k, s).unwrap();
            for a in 0..na {
                let o = &mut dst[(s * na + a) * ns..(s * na + a + 1) * ns];
                for u in 0..nu {
                    if pu[u] == 0.0 {
                        continue;
                    }
                    for (x, &p) in o.iter_mut().zip(mdp.kernel_row(k, s, u, a)) {
                        *x += pu[u] * p;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// One forward step of the joint `(s, u)` occupancy under `policy`.
fn step_joint(mdp: &ConfoundedMdp, policy: &Policy, h: usize, d: &[f64]) -> Vec<f64> {
    let (ns, nu, na, hz) = dims(mdp);
    let mut out = vec![0.0; ns * nu];
    let mut mass_s = vec![0.0; ns];
    for s in 0..ns {
        for u in 0..nu {
            let m = d[s * nu + u];
            if m == 0.0 {
                continue;
            }
            let p = policy.probs(h, s, u);
            for a in 0..na {
                let w = m * p[a];
                if w == 0.0 {
                    continue;
                }
                let row = mdp.kernel_row(h, s, u, a);
                match mdp.process() {
                    ConfounderProcess::Memoryless(_) => {
                        for s2 in 0..ns {
                            mass_s[s2] += w * row[s2];
                        }
                    }
                    ConfounderProcess::Global(_) => {
                        for s2 in 0..ns {
                            out[s2 * nu + u] += w * row[s2];
                        }
                    }
                    ConfounderProcess::HistoryDeterministic { next, .. } => {
                        let u2 = next[u * na + a];
                        for s2 in 0..ns {
                            out[s2 * nu + u2] += w * row[s2];
                        }
                    }
                }
            }
        }
    }
    if let ConfounderProcess::Memoryless(_) = mdp.process() {
        let hn = (h + 1).min(hz - 1);
        for s2 in 0..ns {
            let pu = mdp.memoryless_row(hn, s2).unwrap();
            for u2 in 0..nu {
                out[s2 * nu + u2] = mass_s[s2] * pu[u2];
            }
        }
    }
    out
}

/// `d_h(s, u)` for `h = 1..H`, laid out `[h][s][u]`.
pub fn joint_occupancy(mdp: &ConfoundedMdp, policy: &Policy) -> Result<Vec<f64>> {
    let (ns, nu, na, hz) = dims(mdp);
    policy.check_dims(ns, nu, na, hz)?;
    let mut out = Vec::with_capacity(hz * ns * nu);
    let mut d = mdp.initial_joint();
    for h in 0..hz {
        out.extend_from_slice(&d);
        if h + 1 < hz {
            d = step_joint(mdp, policy, h, &d);
        }
    }
    Ok(out)
}

/// What infinitely many behavior trajectories reveal at each step.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedLaw {
    pub n_states: usize,
    pub n_actions: usize,
    pub horizon: usize,
    /// `pi_b,h(a | s)`.
    pub pi_b: StageTable,
    /// `P^{pi_b}_h(s' | s, a)`, laid out `[s][a][s']`.
    pub kernel: StageTable,
    /// Whether `pi_b,h(a | s) > 0`, so the kernel row is meaningful.
    pub defined: Vec<bool>,
    /// Posterior `P_h(u | s)` used to weight confounders, `[h][s][u]`.
    pub posterior: Vec<f64>,
    pub state_occ: Vec<f64>,
    pub sa_occ: Vec<f64>,
}

/// Forward-filters the behavior process. Unvisited states get uniform
/// confounder weights; memoryless processes use `P_h(u | s)` directly.
pub fn observed_law(mdp: &ConfoundedMdp, pi_b: &Policy) -> Result<ObservedLaw> {
    let (ns, nu, na, hz) = dims(mdp);
    let occ = joint_occupancy(mdp, pi_b)?;
    let mut pib = StageTable::zeros(hz, ns * na);
    let mut kernel = StageTable::zeros(hz, ns * na * ns);
    let mut defined = vec![false; hz * ns * na];
    let mut posterior = vec![0.0; hz * ns * nu];
    let mut state_occ = vec![0.0; hz * ns];
    let mut sa_occ = vec![0.0; hz * ns * na];
    for h in 0..hz {
        let d = &occ[h * ns * nu..(h + 1) * ns * nu];
        for s in 0..ns {
            let ds: f64 = d[s * nu..(s + 1) * nu].iter().sum();
            state_occ[h * ns + s] = ds;
            let post = &mut posterior[(h * ns + s) * nu..(h * ns + s + 1) * nu];
            match mdp.memoryless_row(h, s) {
                Some(pu) => post.copy_from_slice(pu),
                None if ds > 0.0 => {
                    for u in 0..nu {
                        post[u] = d[s * nu + u] / ds;
                    }
                }
                None => post.iter_mut().for_each(|x| *x = 1.0 / nu as f64),
            }
            for a in 0..na {
                let mut pa = 0.0;
                let mut occ_sa = 0.0;
                for u in 0..nu {
                    let pr = pi_b.probs(h, s, u)[a];
                    pa += post[u] * pr;
                    occ_sa += d[s * nu + u] * pr;
                }
                pib.stage_mut(h)[s * na + a] = pa;
                sa_occ[(h * ns + s) * na + a] = occ_sa;
                if pa <= 0.0 {
                    continue;
                }
                defined[(h * ns + s) * na + a] = true;
                let row = &mut kernel.stage_mut(h)[(s * na + a) * ns..(s * na + a + 1) * ns];
                for u in 0..nu {
                    let w = post[u] * pi_b.probs(h, s, u)[a] / pa;
                    if w == 0.0 {
                        continue;
                    }
                    for (x, &p) in row.iter_mut().zip(mdp.kernel_row(h, s, u, a)) {
                        *x += w * p;
                    }
                }
            }
        }
    }
    Ok(ObservedLaw {
        n_states: ns,
        n_actions: na,
        horizon: hz,
        pi_b: pib,
        kernel,
        defined,
        posterior,
        state_occ,
        sa_occ,
    })
}

/// The confounder-marginalised behavior policy `pi_b,h(a | s)`.
pub fn marginalize_behavior(mdp: &ConfoundedMdp, pi_b: &Policy) -> Result<ObservedPolicy> {
    let law = observed_law(mdp, pi_b)?;
    ObservedPolicy::new(mdp.n_states(), mdp.n_actions(), law.pi_b)
}

fn odds(p: f64) -> f64 {
    p / (1.0 - p)
}

fn odds_ratio(p: f64, q: f64) -> f64 {
    if (p - q).abs() < 1e-15 {
        return 1.0;
    }
    if p <= 0.0 || p >= 1.0 || q <= 0.0 || q >= 1.0 {
        return f64::INFINITY;
    }
    let r = odds(p) / odds(q);
    r.max(1.0 / r)
}

/// Smallest `Gamma` for which `pi_b` satisfies the odds-ratio sensitivity
/// model against its own marginalisation.
pub fn realized_gamma(mdp: &ConfoundedMdp, pi_b: &Policy) -> Result<f64> {
    let (ns, nu, na, hz) = dims(mdp);
    let law = observed_law(mdp, pi_b)?;
    let mut g: f64 = 1.0;
    for h in 0..hz {
        for s in 0..ns {
            let post = &law.posterior[(h * ns + s) * nu..(h * ns + s + 1) * nu];
            for u in 0..nu {
                if post[u] <= 0.0 {
                    continue;
                }
                let p = pi_b.probs(h, s, u);
                for a in 0..na {
                    g = g.max(odds_ratio(p[a], law.pi_b.stage(h)[s * na + a]));
                }
            }
        }
    }
    Ok(g)
}

/// Occupancy-based coverage quantities for `pi_e` against `pi_b`.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyReport {
    /// `d^{pi_b}_h(s)`, `[h][s]`.
    pub behavior: Vec<f64>,
    /// `d^{pi_e}_h(s)`, `[h][s]`.
    pub evaluation: Vec<f64>,
    /// State concentrability `max d^e / d^b` over states `pi_e` reaches.
    pub tau_s: f64,
    /// Action concentrability `max pi_e / pi_b` over reached states.
    pub tau_a: f64,
    /// Smallest behavior occupancy of a state `pi_e` reaches.
    pub d_min: f64,
}

pub fn occupancies(mdp: &ConfoundedMdp, pi_b: &Policy, pi_e: &ObservedPolicy) -> Result<OccupancyReport> {
    let (ns, nu, na, hz) = dims(mdp);
    let law = observed_law(mdp, pi_b)?;
    let pe = Policy::Observed(pi_e.clone());
    let occ_e = joint_occupancy(mdp, &pe)?;
    let evaluation: Vec<f64> = occ_e.chunks(nu).map(|c| c.iter().sum()).collect();
    let mut tau_s: f64 = 0.0;
    let mut tau_a: f64 = 0.0;
    let mut d_min = f64::INFINITY;
    for h in 0..hz {
        for s in 0..ns {
            let de = evaluation[h * ns + s];
            if de <= 1e-300 {
                continue;
            }
            let db = law.state_occ[h * ns + s];
            tau_s = tau_s.max(if db > 0.0 { de / db } else { f64::INFINITY });
            d_min = d_min.min(db);
            for a in 0..na {
                let e = pi_e.prob(h, s, a);
                if e > 0.0 {
                    let b = law.pi_b.stage(h)[s * na + a];
                    tau_a = tau_a.max(if b > 0.0 { e / b } else { f64::INFINITY });
                }
            }
        }
    }
    Ok(OccupancyReport {
        behavior: law.state_occ,
        evaluation,
        tau_s,
        tau_a,
        d_min,
    })
}

/// Exact law of observed trajectories `(s_1, a_1, ..., s_H, a_H)` by
/// enumeration. Exponential in `H`; only for small fixtures.
pub fn trajectory_law(mdp: &ConfoundedMdp, policy: &Policy) -> Result<alloc::collections::BTreeMap<Vec<usize>, f64>> {
    let (ns, nu, na, hz) = dims(mdp);
    policy.check_dims(ns, nu, na, hz)?;
    let mut out = alloc::collections::BTreeMap::new();
    let init = mdp.initial_joint();
    let mut path = Vec::with_capacity(2 * hz);
    // Memoryless confounders are summed out step by step.
    for s in 0..ns {
        for u in 0..nu {
            let p = init[s * nu + u];
            if p > 0.0 {
                path.push(s);
                walk(mdp, policy, 0, s, u, p, &mut path, &mut out);
                path.pop();
            }
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn walk(
    mdp: &ConfoundedMdp,
    policy: &Policy,
    h: usize,
    s: usize,
    u: usize,
    prob: f64,
    path: &mut Vec<usize>,
    out: &mut alloc::collections::BTreeMap<Vec<usize>, f64>,
) {
    let (ns, nu, na, hz) = dims(mdp);
    for a in 0..na {
        let pa = policy.probs(h, s, u)[a];
        if pa == 0.0 {
            continue;
        }
        path.push(a);
        if h + 1 == hz {
            *out.entry(path.clone()).or_insert(0.0) += prob * pa;
        } else {
            let row = mdp.kernel_row(h, s, u, a);
            for s2 in 0..ns {
                if row[s2] == 0.0 {
                    continue;
                }
                let p = prob * pa * row[s2];
                path.push(s2);
                match mdp.process() {
                    ConfounderProcess::Memoryless(_) => {
                        let pu = mdp.memoryless_row(h + 1, s2).unwrap();
                        for u2 in 0..nu {
                            if pu[u2] > 0.0 {
                                walk(mdp, policy, h + 1, s2, u2, p * pu[u2], path, out);
                            }
                        }
                    }
                    ConfounderProcess::Global(_) => walk(mdp, policy, h + 1, s2, u, p, path, out),
                    ConfounderProcess::HistoryDeterministic { next, .. } => {
                        walk(mdp, policy, h + 1, s2, next[u * na + a], p, path, out)
                    }
                }
                path.pop();
            }
        }
        path.pop();
    }
}

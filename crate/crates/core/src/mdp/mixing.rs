use alloc::vec;
use alloc::vec::Vec;

use super::{ConfoundedMdp, Policy};
use crate::error::{Error, Result};

const CAP: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoMixing {
    /// More than one closed class.
    Reducible,
    /// A single closed class with period above one.
    Periodic,
    /// Still above 1/4 after the step cap.
    Slow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mixing {
    Steps(usize),
    Failed(NoMixing),
}

/// Total-variation mixing time (threshold 1/4) of the chain on `(s, a)` pairs
/// generated by a stationary MDP with the confounder fixed to `u`.
pub fn mixing_time(mdp: &ConfoundedMdp, pi_b: &Policy, u: usize) -> Result<Mixing> {
    if !mdp.stationary() || pi_b.n_stages() != 1 {
        return Err(Error::param("mixing time needs a stationary kernel and policy"));
    }
    if u >= mdp.n_confounders() {
        return Err(Error::param("confounder index out of range"));
    }
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    pi_b.check_dims(ns, mdp.n_confounders(), na, mdp.horizon())?;
    let n = ns * na;
    let mut succ: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for s in 0..ns {
        for a in 0..na {
            let row = mdp.kernel_row(0, s, u, a);
            for (s2, &p) in row.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                for (a2, &q) in pi_b.probs(0, s2, u).iter().enumerate() {
                    if q > 0.0 {
                        succ[s * na + a].push((s2 * na + a2, p * q));
                    }
                }
            }
        }
    }
    if let Some(why) = structure(&succ) {
        return Ok(Mixing::Failed(why));
    }
    let step = |d: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, &m) in d.iter().enumerate() {
            if m != 0.0 {
                for &(j, p) in &succ[i] {
                    out[j] += m * p;
                }
            }
        }
    };
    let mut mu = vec![1.0 / n as f64; n];
    let mut tmp = vec![0.0; n];
    for _ in 0..1_000_000 {
        step(&mu, &mut tmp);
        let diff: f64 = mu.iter().zip(&tmp).map(|(a, b)| (a - b).abs()).sum();
        core::mem::swap(&mut mu, &mut tmp);
        if diff < 1e-14 {
            break;
        }
    }
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = vec![0.0; n];
            r[i] = 1.0;
            r
        })
        .collect();
    let tv = |r: &[f64]| 0.5 * r.iter().zip(&mu).map(|(a, b)| (a - b).abs()).sum::<f64>();
    for t in 0..=CAP {
        if rows.iter().all(|r| tv(r) <= 0.25) {
            return Ok(Mixing::Steps(t));
        }
        for r in rows.iter_mut() {
            step(r, &mut tmp);
            r.copy_from_slice(&tmp);
        }
    }
    Ok(Mixing::Failed(NoMixing::Slow))
}

/// Detects chains that can never mix: several closed classes, or a periodic
/// closed class.
fn structure(succ: &[Vec<(usize, f64)>]) -> Option<NoMixing> {
    let n = succ.len();
    let comp = scc(succ);
    let ncomp = comp.iter().copied().max().map_or(0, |m| m + 1);
    let mut closed = vec![true; ncomp];
    for i in 0..n {
        for &(j, _) in &succ[i] {
            if comp[i] != comp[j] {
                closed[comp[i]] = false;
            }
        }
    }
    let closed_ids: Vec<usize> = (0..ncomp).filter(|&c| closed[c]).collect();
    if closed_ids.len() > 1 {
        return Some(NoMixing::Reducible);
    }
    let c = closed_ids[0];
    let root = (0..n).find(|&i| comp[i] == c).unwrap();
    let mut level = vec![usize::MAX; n];
    level[root] = 0;
    let mut queue = vec![root];
    let mut head = 0;
    let mut g = 0usize;
    while head < queue.len() {
        let i = queue[head];
        head += 1;
        for &(j, _) in &succ[i] {
            if comp[j] != c {
                continue;
            }
            if level[j] == usize::MAX {
                level[j] = level[i] + 1;
                queue.push(j);
            } else {
                let d = (level[i] + 1).abs_diff(level[j]);
                g = gcd(g, d);
            }
        }
    }
    if g > 1 {
        Some(NoMixing::Periodic)
    } else {
        None
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Strongly connected components (iterative Tarjan).
fn scc(succ: &[Vec<(usize, f64)>]) -> Vec<usize> {
    let n = succ.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![usize::MAX; n];
    let mut next_index = 0;
    let mut ncomp = 0;
    for start in 0..n {
        if index[start] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(start, 0)];
        index[start] = next_index;
        low[start] = next_index;
        next_index += 1;
        stack.push(start);
        on_stack[start] = true;
        while let Some(&mut (v, ref mut k)) = call.last_mut() {
            if *k < succ[v].len() {
                let w = succ[v][*k].0;
                *k += 1;
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(p, _)) = call.last() {
                    low[p] = low[p].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp[w] = ncomp;
                        if w == v {
                            break;
                        }
                    }
                    ncomp += 1;
                }
            }
        }
    }
    comp
}

/// Largest mixing time over confounder values, or the first failure.
pub fn mixing_time_max(mdp: &ConfoundedMdp, pi_b: &Policy) -> Result<Mixing> {
    let mut worst = 0;
    for u in 0..mdp.n_confounders() {
        match mixing_time(mdp, pi_b, u)? {
            Mixing::Steps(t) => worst = worst.max(t),
            failed => return Ok(failed),
        }
    }
    Ok(Mixing::Steps(worst))
}

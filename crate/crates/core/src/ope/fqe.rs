use alloc::vec;
use alloc::vec::Vec;

use super::coverage::check_coverage;
use super::knapsack::fill;
use super::theory::naive_correction;
use super::{Diagnostics, Method, ValueReport};
use crate::data::{EmpiricalModel, Mode};
use crate::error::{Error, Result};
use crate::mdp::ObservedPolicy;
use crate::sensitivity::TransitionUncertainty;
use crate::table::dot;

fn check_inputs(model: &EmpiricalModel, pi_e: &ObservedPolicy, start: &[f64]) -> Result<()> {
    model.check_policy(pi_e.n_states(), pi_e.n_actions())?;
    if start.len() != model.n_states {
        return Err(Error::Dimension {
            what: "start distribution",
            expected: model.n_states,
            found: start.len(),
        });
    }
    let st = pi_e.table().stages();
    if st != 1 && st < model.horizon {
        return Err(Error::param("per-step evaluation policy is shorter than the horizon"));
    }
    Ok(())
}

fn step_fn(mode: Mode) -> impl Fn(usize) -> Option<usize> {
    move |h| match mode {
        Mode::Pooled => None,
        Mode::PerStep => Some(h),
    }
}

fn check_tu(model: &EmpiricalModel, tu: &TransitionUncertainty) -> Result<()> {
    if tu.n_states != model.n_states || tu.n_actions != model.n_actions {
        return Err(Error::param("uncertainty set does not match the model"));
    }
    if tu.stages() != 1 && tu.stages() < model.horizon {
        return Err(Error::param("uncertainty set has fewer stages than the horizon"));
    }
    Ok(())
}

/// Fitted Q evaluation on the observed law: the plug-in Bellman backup.
pub fn fqe(model: &EmpiricalModel, pi_e: &ObservedPolicy, start: &[f64]) -> Result<ValueReport> {
    check_inputs(model, pi_e, start)?;
    let (ns, na, hz) = (model.n_states, model.n_actions, model.horizon);
    let reliable = check_coverage(
        pi_e,
        hz,
        start,
        step_fn(model.mode),
        |h, s, a| model.reward_known[s * na + a] && (h + 1 == hz || model.kernel_known(h, s, a)),
        |h, s, a, s2| model.kernel_row(h, s, a)[s2] > 0.0,
    )?;
    let mut v = vec![0.0; (hz + 1) * ns];
    let mut q = vec![0.0; hz * ns * na];
    for h in (0..hz).rev() {
        let (cur, next) = v.split_at_mut((h + 1) * ns);
        let next = &next[..ns];
        for s in 0..ns {
            let p = pi_e.probs(h, s);
            let mut vs = 0.0;
            for a in 0..na {
                let mut f = model.reward(s, a);
                if h + 1 < hz {
                    f += dot(model.kernel_row(h, s, a), next);
                }
                q[(h * ns + s) * na + a] = f;
                vs += p[a] * f;
            }
            cur[h * ns + s] = vs;
        }
    }
    Ok(ValueReport {
        method: Method::Fqe,
        horizon: hz,
        n_states: ns,
        n_actions: na,
        value: dot(start, &v[..ns]),
        v,
        q,
        reliable,
        is_lower_bound: false,
        diagnostics: Diagnostics::default(),
    })
}

/// Shifts an FQE estimate by the worst-case compounding of a `1 + eps`
/// likelihood-ratio error at every remaining step.
pub fn naive_fqe_lower_bound(fqe: &ValueReport, eps: f64, reward_range: f64) -> ValueReport {
    let (ns, hz) = (fqe.n_states, fqe.horizon);
    let mut out = fqe.clone();
    for h in 0..hz {
        let c = naive_correction(eps, hz - h) * reward_range;
        for s in 0..ns {
            out.v[h * ns + s] += c;
        }
    }
    out.value = fqe.value + naive_correction(eps, hz) * reward_range;
    out.method = Method::NaiveFqe;
    out.is_lower_bound = true;
    out
}

/// Confounded FQE: each backup takes the worst transition row in the box.
pub fn cfqe(
    model: &EmpiricalModel,
    pi_e: &ObservedPolicy,
    tu: &TransitionUncertainty,
    start: &[f64],
) -> Result<ValueReport> {
    check_inputs(model, pi_e, start)?;
    check_tu(model, tu)?;
    let (ns, na, hz) = (model.n_states, model.n_actions, model.horizon);
    let reliable = check_coverage(
        pi_e,
        hz,
        start,
        step_fn(tu.mode),
        |h, s, a| model.reward_known[s * na + a] && (h + 1 == hz || tu.known(h, s, a)),
        |h, s, a, s2| tu.hi(h, s, a)[s2] > 0.0,
    )?;
    let mut v = vec![0.0; (hz + 1) * ns];
    let mut q = vec![0.0; hz * ns * na];
    let mut order = Vec::with_capacity(ns);
    let mut m = vec![0.0; ns];
    let mut calls = 0;
    for h in (0..hz).rev() {
        let (cur, next) = v.split_at_mut((h + 1) * ns);
        let next = &next[..ns];
        for s in 0..ns {
            let p = pi_e.probs(h, s);
            let mut vs = 0.0;
            for a in 0..na {
                let mut f = model.reward(s, a);
                if h + 1 < hz {
                    calls += 1;
                    f += worst_row(next, tu, h, s, a, &mut order, &mut m)?;
                }
                q[(h * ns + s) * na + a] = f;
                vs += p[a] * f;
            }
            cur[h * ns + s] = vs;
        }
    }
    Ok(ValueReport {
        method: Method::Cfqe,
        horizon: hz,
        n_states: ns,
        n_actions: na,
        value: dot(start, &v[..ns]),
        v,
        q,
        reliable,
        is_lower_bound: true,
        diagnostics: Diagnostics {
            solver_calls: calls,
            ..Diagnostics::default()
        },
    })
}

fn worst_row(
    cost: &[f64],
    tu: &TransitionUncertainty,
    h: usize,
    s: usize,
    a: usize,
    order: &mut Vec<usize>,
    m: &mut [f64],
) -> Result<f64> {
    fill(cost, tu.lo(h, s, a), tu.hi(h, s, a), order, m).ok_or_else(|| Error::Infeasible {
        cells: alloc::vec![crate::Cell {
            step: if tu.stages() == 1 { None } else { Some(h) },
            state: s,
            action: a,
        }],
    })
}

/// Worst case over kernels that may change with the step: a state-value
/// recursion where each `(s, a)` row is minimised independently.
pub fn mb_relaxation(
    model: &EmpiricalModel,
    pi_e: &ObservedPolicy,
    tu: &TransitionUncertainty,
    start: &[f64],
) -> Result<ValueReport> {
    check_inputs(model, pi_e, start)?;
    check_tu(model, tu)?;
    let (ns, na, hz) = (model.n_states, model.n_actions, model.horizon);
    let reliable = check_coverage(
        pi_e,
        hz,
        start,
        step_fn(tu.mode),
        |h, s, a| model.reward_known[s * na + a] && (h + 1 == hz || tu.known(h, s, a)),
        |h, s, a, s2| tu.hi(h, s, a)[s2] > 0.0,
    )?;
    let mut v = vec![0.0; (hz + 1) * ns];
    let mut order = Vec::with_capacity(ns);
    let mut m = vec![0.0; ns];
    let mut calls = 0;
    for h in (0..hz).rev() {
        for s in 0..ns {
            let mut total = 0.0;
            for (a, &w) in pi_e.probs(h, s).iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let future = if h + 1 < hz {
                    calls += 1;
                    let next = &v[(h + 1) * ns..(h + 2) * ns];
                    worst_row(next, tu, h, s, a, &mut order, &mut m)?
                } else {
                    0.0
                };
                total += w * (model.reward(s, a) + future);
            }
            v[h * ns + s] = total;
        }
    }
    Ok(ValueReport {
        method: Method::MbRelax,
        horizon: hz,
        n_states: ns,
        n_actions: na,
        value: dot(start, &v[..ns]),
        v,
        q: Vec::new(),
        reliable,
        is_lower_bound: true,
        diagnostics: Diagnostics {
            solver_calls: calls,
            ..Diagnostics::default()
        },
    })
}

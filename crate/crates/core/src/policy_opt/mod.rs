//! Policy improvement: max-min ascent on the model-based lower bound and
//! clustering-based policy gradient for global confounders.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::{count_stats, EmpiricalModel, Mode, Trajectory};
use crate::error::{Error, Result};
use crate::global::ClusterAssignment;
use crate::mdp::{ObservedPolicy, SoftmaxPolicy};
use crate::ope::{mb_pgd, mb_value_and_grad, pgd_minimize, PgdConfig};
use crate::sensitivity::TransitionUncertainty;
use crate::table::dot;

/// Chain rule through a row-wise softmax:
/// `dV/dtheta(s, b) = pi(b|s) (g(s, b) - sum_a pi(a|s) g(s, a))`.
pub fn softmax_grad(logits: &[f64], n_actions: usize, downstream: &[f64]) -> Result<Vec<f64>> {
    if n_actions == 0 || logits.len() % n_actions != 0 || downstream.len() != logits.len() {
        return Err(Error::Dimension {
            what: "softmax gradient",
            expected: logits.len(),
            found: downstream.len(),
        });
    }
    let mut out = vec![0.0; logits.len()];
    let mut p = vec![0.0; n_actions];
    for ((row, g), o) in logits
        .chunks(n_actions)
        .zip(downstream.chunks(n_actions))
        .zip(out.chunks_mut(n_actions))
    {
        crate::mdp::softmax_into(row, &mut p);
        let mean = dot(&p, g);
        for a in 0..n_actions {
            o[a] = p[a] * (g[a] - mean);
        }
    }
    Ok(out)
}

/// Sums a per-step `[h][s][a]` gradient into the stationary `[s][a]` one.
fn fold_stages(d: &[f64], stride: usize) -> Vec<f64> {
    let mut out = vec![0.0; stride];
    for row in d.chunks(stride) {
        for (o, x) in out.iter_mut().zip(row) {
            *o += x;
        }
    }
    out
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Ascent history. Entry `t` describes the iterate before update `t`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ImprovementTrace {
    pub logits: Vec<Vec<f64>>,
    pub objective: Vec<f64>,
    pub grad_norm: Vec<f64>,
    pub lr: Vec<f64>,
    /// Objective at the returned policy.
    pub final_objective: f64,
}

impl ImprovementTrace {
    pub fn len(&self) -> usize {
        self.objective.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objective.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxMinConfig {
    pub outer_iters: usize,
    pub inner_iters: usize,
    /// Ascent step at outer iteration `t` is `lr0 / sqrt(t)`.
    pub lr0: f64,
    pub inner: PgdConfig,
}

impl Default for MaxMinConfig {
    fn default() -> Self {
        MaxMinConfig {
            outer_iters: 100,
            inner_iters: 20,
            lr0: 0.1,
            inner: PgdConfig::default(),
        }
    }
}

/// Alternates a warm-started inner minimisation over stationary kernels in
/// the uncertainty set with one ascent step on the policy logits at the
/// inner minimiser. The first warm start and the final objective are full
/// inner solves.
pub fn maxmin_improve(
    model: &EmpiricalModel,
    tu: &TransitionUncertainty,
    theta0: &SoftmaxPolicy,
    cfg: &MaxMinConfig,
    start: &[f64],
) -> Result<(SoftmaxPolicy, ImprovementTrace)> {
    let (ns, na, hz) = (model.n_states, model.n_actions, model.horizon);
    // a full solve for the initial policy checks coverage and seeds the warm start
    let (_, mut kernel) = mb_pgd(model, theta0.policy(), tu, start, cfg.inner)?;
    let set = tu.stationary_set()?;
    let mut theta = theta0.clone();
    let mut trace = ImprovementTrace::default();
    for t in 1..=cfg.outer_iters {
        let pi = theta.policy();
        let r = pgd_minimize(
            &set,
            &model.reward,
            pi,
            hz,
            start,
            &kernel,
            cfg.inner_iters,
            cfg.inner.lr0,
        )?;
        kernel = r.best_kernel;
        let vg = mb_value_and_grad(&kernel, &model.reward, pi, hz, start);
        let g = softmax_grad(theta.logits(), na, &fold_stages(&vg.d_policy, ns * na))?;
        let lr = cfg.lr0 / (t as f64).sqrt();
        trace.logits.push(theta.logits().to_vec());
        trace.objective.push(vg.value);
        trace.grad_norm.push(norm(&g));
        trace.lr.push(lr);
        let next: Vec<f64> = theta.logits().iter().zip(&g).map(|(x, d)| x + lr * d).collect();
        theta = SoftmaxPolicy::new(ns, na, next)?;
    }
    trace.final_objective = mb_pgd(model, theta.policy(), tu, start, cfg.inner)?.0.value;
    Ok((theta, trace))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgEstimator {
    /// Per-decision importance-weighted REINFORCE.
    IsReinforce,
    /// Behavior-occupancy weighted `grad log pi * Q` with `Q` from the
    /// cluster's plug-in model.
    ApproxOffPolicy,
    /// Exact gradient of the plug-in model's value at the start distribution.
    PlugIn,
}

impl PgEstimator {
    pub fn name(&self) -> &'static str {
        match self {
            PgEstimator::IsReinforce => "is-reinforce",
            PgEstimator::ApproxOffPolicy => "approx-off-policy",
            PgEstimator::PlugIn => "plug-in",
        }
    }
}

/// Trajectories of one cluster with the statistics every estimator needs.
#[derive(Clone, Debug)]
pub struct ClusterData {
    pub trajectories: Vec<Trajectory>,
    pub model: EmpiricalModel,
    /// Empirical `d^b_h(s)`, rows `0..H`.
    pub occupancy: Vec<f64>,
}

impl ClusterData {
    pub fn new(trajs: &[Trajectory], n_states: usize, n_actions: usize, horizon: usize) -> Result<Self> {
        if trajs.is_empty() {
            return Err(Error::param("empty cluster"));
        }
        let cs = count_stats(trajs, n_states, n_actions, horizon)?;
        let n = trajs.len() as f64;
        Ok(ClusterData {
            trajectories: trajs.to_vec(),
            occupancy: cs.state.iter().map(|c| c / n).collect(),
            model: EmpiricalModel::from_counts(&cs, Mode::Pooled),
        })
    }

    /// Plug-in value of `pi` at `start`.
    pub fn plugin_value(&self, pi: &ObservedPolicy, start: &[f64]) -> f64 {
        let m = &self.model;
        mb_value_and_grad(m.kernel.data(), &m.reward, pi, m.horizon, start).value
    }
}

/// Estimate of `grad_theta V_1` from one cluster's trajectories.
pub fn per_cluster_pg(
    data: &ClusterData,
    policy: &SoftmaxPolicy,
    estimator: PgEstimator,
    start: &[f64],
) -> Result<Vec<f64>> {
    let m = &data.model;
    let (ns, na, hz) = (m.n_states, m.n_actions, m.horizon);
    let pi = policy.policy();
    if pi.n_states() != ns || pi.n_actions() != na {
        return Err(Error::param("policy dimensions do not match the cluster data"));
    }
    match estimator {
        PgEstimator::PlugIn => {
            let vg = mb_value_and_grad(m.kernel.data(), &m.reward, pi, hz, start);
            softmax_grad(policy.logits(), na, &fold_stages(&vg.d_policy, ns * na))
        }
        PgEstimator::ApproxOffPolicy => {
            let vg = mb_value_and_grad(m.kernel.data(), &m.reward, pi, hz, start);
            let mut g = vec![0.0; ns * na];
            for h in 0..hz {
                let next = &vg.v[(h + 1) * ns..(h + 2) * ns];
                for s in 0..ns {
                    let d = data.occupancy[h * ns + s];
                    if d == 0.0 {
                        continue;
                    }
                    let p = pi.probs(0, s);
                    let q: Vec<f64> = (0..na)
                        .map(|a| {
                            m.reward(s, a)
                                + if h + 1 < hz {
                                    dot(m.kernel_row(h, s, a), next)
                                } else {
                                    0.0
                                }
                        })
                        .collect();
                    let v = dot(p, &q);
                    for b in 0..na {
                        g[s * na + b] += d * p[b] * (q[b] - v);
                    }
                }
            }
            Ok(g)
        }
        PgEstimator::IsReinforce => {
            let mut g = vec![0.0; ns * na];
            let mut weighted = vec![0.0; hz];
            for (i, t) in data.trajectories.iter().enumerate() {
                let mut w = 1.0;
                for k in 0..t.len() {
                    let (s, a) = (t.states[k], t.actions[k]);
                    let b = m.pi_b(k, s)[a];
                    if b == 0.0 {
                        return Err(Error::param(alloc::format!(
                            "trajectory {i} takes action {a} in state {s} where the behavior estimate is zero"
                        )));
                    }
                    w *= pi.prob(0, s, a) / b;
                    weighted[k] = w * t.rewards[k];
                }
                // reward-to-go with each reward carrying the ratios up to its own step
                let mut tail = 0.0;
                for k in (0..t.len()).rev() {
                    tail += weighted[k];
                    let (s, a) = (t.states[k], t.actions[k]);
                    let p = pi.probs(0, s);
                    for b in 0..na {
                        let score = if b == a { 1.0 - p[b] } else { -p[b] };
                        g[s * na + b] += score * tail;
                    }
                }
            }
            let n = data.trajectories.len() as f64;
            g.iter_mut().for_each(|x| *x /= n);
            Ok(g)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterPgConfig {
    pub lr: f64,
    pub iters: usize,
    pub estimator: PgEstimator,
}

impl Default for ClusterPgConfig {
    fn default() -> Self {
        ClusterPgConfig {
            lr: 0.05,
            iters: 100,
            estimator: PgEstimator::ApproxOffPolicy,
        }
    }
}

/// Ascends `sum_u P^(u) V_1(start; u, pi_theta)` with per-cluster gradient
/// estimates. The trace records `truth(pi)` when given, otherwise the
/// weighted plug-in value.
pub fn clustering_pg(
    trajs: &[Trajectory],
    ca: &ClusterAssignment,
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    theta0: &SoftmaxPolicy,
    cfg: &ClusterPgConfig,
    start: &[f64],
    truth: Option<&dyn Fn(&ObservedPolicy) -> Result<f64>>,
) -> Result<(SoftmaxPolicy, ImprovementTrace)> {
    if ca.labels.len() != trajs.len() {
        return Err(Error::Dimension {
            what: "cluster labels",
            expected: trajs.len(),
            found: ca.labels.len(),
        });
    }
    let mut clusters = Vec::new();
    for u in 0..ca.n_clusters() {
        if ca.weights[u] == 0.0 {
            continue;
        }
        let members: Vec<Trajectory> = ca.members(u).into_iter().map(|i| trajs[i].clone()).collect();
        clusters.push((ca.weights[u], ClusterData::new(&members, n_states, n_actions, horizon)?));
    }
    let objective = |pi: &ObservedPolicy| -> Result<f64> {
        match truth {
            Some(f) => f(pi),
            None => Ok(clusters.iter().map(|(w, c)| w * c.plugin_value(pi, start)).sum()),
        }
    };
    let mut theta = theta0.clone();
    let mut trace = ImprovementTrace::default();
    for _ in 0..cfg.iters {
        let mut g = vec![0.0; n_states * n_actions];
        for (w, c) in &clusters {
            let z = per_cluster_pg(c, &theta, cfg.estimator, start)?;
            for (x, y) in g.iter_mut().zip(&z) {
                *x += w * y;
            }
        }
        trace.logits.push(theta.logits().to_vec());
        trace.objective.push(objective(theta.policy())?);
        trace.grad_norm.push(norm(&g));
        trace.lr.push(cfg.lr);
        let next: Vec<f64> = theta.logits().iter().zip(&g).map(|(x, d)| x + cfg.lr * d).collect();
        theta = SoftmaxPolicy::new(n_states, n_actions, next)?;
    }
    trace.final_objective = objective(theta.policy())?;
    Ok((theta, trace))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuboptimalityReport {
    /// Index of the true best candidate.
    pub best: usize,
    /// Index of the candidate the estimates pick.
    pub chosen: usize,
    /// `V(best) - V(chosen)`.
    pub gap: f64,
    /// `max |V^ - V|` over the candidates.
    pub max_error: f64,
    /// `0 <= gap <= 2 max_error`.
    pub holds: bool,
}

/// Compares the policy chosen by estimated values with the true best one.
pub fn suboptimality_check<P>(
    candidates: &[P],
    v_true: impl Fn(&P) -> Result<f64>,
    v_hat: impl Fn(&P) -> Result<f64>,
) -> Result<SuboptimalityReport> {
    if candidates.is_empty() {
        return Err(Error::param("no candidate policies"));
    }
    let mut vt = Vec::with_capacity(candidates.len());
    let mut vh = Vec::with_capacity(candidates.len());
    for c in candidates {
        vt.push(v_true(c)?);
        vh.push(v_hat(c)?);
    }
    let argmax = |v: &[f64]| {
        let mut b = 0;
        for i in 1..v.len() {
            if v[i] > v[b] {
                b = i;
            }
        }
        b
    };
    let (best, chosen) = (argmax(&vt), argmax(&vh));
    let gap = vt[best] - vt[chosen];
    let max_error = vt.iter().zip(&vh).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(SuboptimalityReport {
        best,
        chosen,
        gap,
        max_error,
        holds: gap >= 0.0 && gap <= 2.0 * max_error + 1e-12 * (1.0 + max_error),
    })
}

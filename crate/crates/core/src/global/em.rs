use alloc::vec;
use alloc::vec::Vec;

use super::separation::canonical_order;
use super::stats::{ClusterModel, TrajectoryStats};
use super::{label_weights, ClusterAssignment, ClusterMethod};
use crate::data::Trajectory;
use crate::error::{Error, Result};
use crate::rng::Stream;

const PSEUDO: f64 = 1.0;

/// Soft EM over mixtures of `(s, a)` chains from random responsibilities,
/// with add-one smoothing (a MAP estimate under a flat Dirichlet). `trace`
/// holds the penalized log-likelihood before each M-step, which never
/// decreases.
pub fn cluster_soft_em(
    trajs: &[Trajectory],
    n_states: usize,
    n_actions: usize,
    n_clusters: usize,
    seed: u64,
    iters: usize,
    view: Option<&[usize]>,
) -> Result<ClusterAssignment> {
    let n = trajs.len();
    if n_clusters == 0 || n_clusters > n {
        return Err(Error::param(alloc::format!(
            "cannot form {n_clusters} clusters from {n} trajectories"
        )));
    }
    let st = TrajectoryStats::new(trajs, n_states, n_actions, view)?;
    if n_clusters == 1 {
        let mut ca = ClusterAssignment::from_labels(vec![0; n], 1, ClusterMethod::SoftEm)?;
        ca.trace
            .push(penalized(&st, &[1.0], &[ClusterModel::fit(&st, &vec![1.0; n], PSEUDO)]).0);
        return Ok(ca);
    }
    let k = n_clusters;
    let mut rng = Stream::new(seed, 0);
    let mut resp = vec![0.0; n * k];
    for row in resp.chunks_mut(k) {
        for x in row.iter_mut() {
            *x = rng.uniform() + 1e-3;
        }
        let z: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= z);
    }
    let mut trace = Vec::with_capacity(iters);
    let (mut mix, mut models) = m_step(&st, &resp, k);
    for _ in 0..iters {
        let (obj, post) = penalized(&st, &mix, &models);
        trace.push(obj);
        resp = post;
        (mix, models) = m_step(&st, &resp, k);
    }
    let (_, post) = penalized(&st, &mix, &models);
    let mut labels: Vec<usize> = post
        .chunks(k)
        .map(|r| {
            let mut best = 0;
            for u in 1..k {
                if r[u] > r[best] {
                    best = u;
                }
            }
            best
        })
        .collect();
    canonical_order(&mut labels, k);
    Ok(ClusterAssignment {
        weights: label_weights(&labels, k),
        labels,
        method: ClusterMethod::SoftEm,
        distances: None,
        refine_iterations: iters,
        trace,
    })
}

fn m_step(st: &TrajectoryStats, resp: &[f64], k: usize) -> (Vec<f64>, Vec<ClusterModel>) {
    let n = st.len();
    let mut mix = vec![0.0; k];
    let mut models = Vec::with_capacity(k);
    for u in 0..k {
        let w: Vec<f64> = (0..n).map(|i| resp[i * k + u]).collect();
        mix[u] = w.iter().sum::<f64>() / n as f64;
        models.push(ClusterModel::fit(st, &w, PSEUDO));
    }
    (mix, models)
}

/// Penalized log-likelihood and the posterior responsibilities.
fn penalized(st: &TrajectoryStats, mix: &[f64], models: &[ClusterModel]) -> (f64, Vec<f64>) {
    let k = mix.len();
    let mut post = vec![0.0; st.len() * k];
    let mut total: f64 = models.iter().map(|m| m.log_prior(PSEUDO)).sum();
    for i in 0..st.len() {
        let row = &mut post[i * k..(i + 1) * k];
        for u in 0..k {
            row[u] = if mix[u] > 0.0 {
                mix[u].ln() + models[u].log_likelihood(st, i)
            } else {
                f64::NEG_INFINITY
            };
        }
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|x| (x - m).exp()).sum();
        total += m + z.ln();
        row.iter_mut().for_each(|x| *x = (*x - m).exp() / z);
    }
    (total, post)
}

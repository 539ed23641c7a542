use alloc::vec::Vec;

use super::ClusterAssignment;
use crate::data::{count_stats, EmpiricalModel, Mode, Trajectory};
use crate::error::{Error, Result};
use crate::mdp::ObservedPolicy;
use crate::ope::{fqe, Diagnostics, Method, ValueReport};

/// Tabular plug-in estimate on one cluster: the time-pooled empirical model
/// evaluated exactly.
pub fn per_cluster_plugin_ope(
    trajs: &[Trajectory],
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    pi_e: &ObservedPolicy,
    start: &[f64],
) -> Result<ValueReport> {
    if trajs.is_empty() {
        return Err(Error::param("cannot evaluate an empty cluster"));
    }
    let cs = count_stats(trajs, n_states, n_actions, horizon)?;
    let model = EmpiricalModel::from_counts(&cs, Mode::Pooled);
    let mut r = fqe(&model, pi_e, start)?;
    r.method = Method::Plugin;
    Ok(r)
}

/// Clusters the data, evaluates every non-empty cluster with `ope_fn` and
/// mixes the estimates by cluster frequency.
pub fn clustering_ope<C, O>(trajs: &[Trajectory], cluster_fn: C, ope_fn: O) -> Result<(ValueReport, ClusterAssignment)>
where
    C: FnOnce(&[Trajectory]) -> Result<ClusterAssignment>,
    O: Fn(&[Trajectory]) -> Result<ValueReport>,
{
    let ca = cluster_fn(trajs)?;
    if ca.labels.len() != trajs.len() {
        return Err(Error::Dimension {
            what: "cluster labels",
            expected: trajs.len(),
            found: ca.labels.len(),
        });
    }
    let mut out: Option<ValueReport> = None;
    let mut components = Vec::with_capacity(ca.n_clusters());
    for u in 0..ca.n_clusters() {
        let w = ca.weights[u];
        if w == 0.0 {
            components.push((0.0, 0.0));
            continue;
        }
        let members: Vec<Trajectory> = ca.members(u).into_iter().map(|i| trajs[i].clone()).collect();
        let r = ope_fn(&members)?;
        components.push((w, r.value));
        match &mut out {
            None => {
                let mut first = r.clone();
                first.value = w * r.value;
                first.v.iter_mut().for_each(|x| *x *= w);
                first.q.iter_mut().for_each(|x| *x *= w);
                out = Some(first);
            }
            Some(acc) => {
                if acc.v.len() != r.v.len() || acc.q.len() != r.q.len() {
                    return Err(Error::param("per-cluster reports have different shapes"));
                }
                acc.value += w * r.value;
                for (x, y) in acc.v.iter_mut().zip(&r.v) {
                    *x += w * y;
                }
                for (x, y) in acc.q.iter_mut().zip(&r.q) {
                    *x += w * y;
                }
                for (x, y) in acc.reliable.iter_mut().zip(&r.reliable) {
                    *x &= *y;
                }
                acc.is_lower_bound &= r.is_lower_bound;
            }
        }
    }
    let mut report = out.ok_or_else(|| Error::param("no non-empty cluster"))?;
    report.method = Method::Clustering;
    report.diagnostics = Diagnostics {
        components,
        ..Diagnostics::default()
    };
    Ok((report, ca))
}

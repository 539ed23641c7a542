use alloc::vec;
use alloc::vec::Vec;

use super::stats::{ClusterModel, TrajectoryStats};
use super::{label_weights, ClusterAssignment, ClusterMethod};
use crate::data::Trajectory;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SeparationConfig {
    /// A cell enters the statistic once a trajectory leaves it this often.
    pub tau_count: u32,
    pub refine_iters: usize,
    /// Optional projection applied to states before clustering.
    pub view: Option<Vec<usize>>,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        SeparationConfig {
            tau_count: 5,
            refine_iters: 10,
            view: None,
        }
    }
}

struct Qualified {
    sa: usize,
    n: f64,
    row: Vec<f64>,
}

fn qualified_cells(st: &TrajectoryStats, i: usize, tau: u32) -> Vec<Qualified> {
    (0..st.n_cells())
        .filter_map(|sa| {
            let n = st.cell_count(i, sa);
            (n >= tau.max(1)).then(|| Qualified {
                sa,
                n: n as f64,
                row: st.row(i, sa).unwrap(),
            })
        })
        .collect()
}

/// Largest bias-corrected squared distance over the cells both trajectories
/// visit often enough; `None` without a shared cell.
fn statistic(a: &[Qualified], b: &[Qualified]) -> Option<f64> {
    let (mut i, mut j) = (0, 0);
    let mut best: Option<f64> = None;
    while i < a.len() && j < b.len() {
        match a[i].sa.cmp(&b[j].sa) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                let (x, y) = (&a[i], &b[j]);
                let d: f64 = x
                    .row
                    .iter()
                    .zip(&y.row)
                    .map(|(p, q)| (p - q) * (p - q) - p * (1.0 - p) / x.n - q * (1.0 - q) / y.n)
                    .sum();
                best = Some(best.map_or(d, |b: f64| b.max(d)));
                i += 1;
                j += 1;
            }
        }
    }
    best
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Clusters trajectories by the separation statistic: pairwise distances,
/// a single-linkage cut into `n_clusters` groups, then rounds of
/// likelihood reassignment against the pooled cluster models.
pub fn cluster_separation(
    trajs: &[Trajectory],
    n_states: usize,
    n_actions: usize,
    n_clusters: usize,
    cfg: &SeparationConfig,
) -> Result<ClusterAssignment> {
    let n = trajs.len();
    if n_clusters == 0 || n_clusters > n {
        return Err(Error::param(alloc::format!(
            "cannot form {n_clusters} clusters from {n} trajectories"
        )));
    }
    let st = TrajectoryStats::new(trajs, n_states, n_actions, cfg.view.as_deref())?;
    if n_clusters == 1 {
        return ClusterAssignment::from_labels(vec![0; n], 1, ClusterMethod::Separation);
    }
    let cells: Vec<Vec<Qualified>> = (0..n).map(|i| qualified_cells(&st, i, cfg.tau_count)).collect();
    let mut dist = vec![f64::NAN; n * n];
    let mut edges: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..n {
        dist[i * n + i] = 0.0;
        for j in i + 1..n {
            if let Some(d) = statistic(&cells[i], &cells[j]) {
                dist[i * n + j] = d;
                dist[j * n + i] = d;
                edges.push((d, i, j));
            }
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut parent: Vec<usize> = (0..n).collect();
    let mut components = n;
    for &(_, i, j) in &edges {
        if components == n_clusters {
            break;
        }
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a.max(b)] = a.min(b);
            components -= 1;
        }
    }
    // the largest groups seed the clusters; leftovers go to refinement
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut sizes: Vec<(usize, usize)> = Vec::new();
    for &r in &roots {
        match sizes.iter_mut().find(|(root, _)| *root == r) {
            Some(e) => e.1 += 1,
            None => sizes.push((r, 1)),
        }
    }
    sizes.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut seeds: Vec<usize> = sizes.iter().take(n_clusters).map(|x| x.0).collect();
    seeds.sort_unstable();
    let mut labels: Vec<Option<usize>> = roots.iter().map(|r| seeds.iter().position(|s| s == r)).collect();
    if labels.iter().any(|l| l.is_none()) {
        let fixed: Vec<usize> = labels.iter().map(|l| l.unwrap_or(usize::MAX)).collect();
        let models = fit_models(&st, &fixed, n_clusters);
        for (i, l) in labels.iter_mut().enumerate() {
            if l.is_none() {
                *l = Some(best_model(&models, &st, i));
            }
        }
    }
    let mut labels: Vec<usize> = labels.into_iter().map(|l| l.unwrap()).collect();
    let mut rounds = 0;
    let mut trace = Vec::new();
    for _ in 0..cfg.refine_iters {
        let models = fit_models(&st, &labels, n_clusters);
        rounds += 1;
        let mut changed = false;
        let mut ll = 0.0;
        for (i, l) in labels.iter_mut().enumerate() {
            let b = best_model(&models, &st, i);
            ll += models[b].log_likelihood(&st, i);
            if b != *l {
                *l = b;
                changed = true;
            }
        }
        trace.push(ll);
        if !changed {
            break;
        }
    }
    canonical_order(&mut labels, n_clusters);
    Ok(ClusterAssignment {
        weights: label_weights(&labels, n_clusters),
        labels,
        method: ClusterMethod::Separation,
        distances: Some(dist),
        refine_iterations: rounds,
        trace,
    })
}

fn fit_models(st: &TrajectoryStats, labels: &[usize], k: usize) -> Vec<ClusterModel> {
    (0..k)
        .map(|u| {
            let w: Vec<f64> = labels.iter().map(|&l| if l == u { 1.0 } else { 0.0 }).collect();
            ClusterModel::fit(st, &w, 1.0)
        })
        .collect()
}

fn best_model(models: &[ClusterModel], st: &TrajectoryStats, i: usize) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (u, m) in models.iter().enumerate() {
        let ll = m.log_likelihood(st, i);
        if ll > best.1 {
            best = (u, ll);
        }
    }
    best.0
}

/// Renumbers clusters by first appearance.
pub(crate) fn canonical_order(labels: &mut [usize], k: usize) {
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for l in labels.iter() {
        if map[*l] == usize::MAX {
            map[*l] = next;
            next += 1;
        }
    }
    for m in map.iter_mut() {
        if *m == usize::MAX {
            *m = next;
            next += 1;
        }
    }
    for l in labels.iter_mut() {
        *l = map[*l];
    }
}

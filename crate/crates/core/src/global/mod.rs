//! Off-policy evaluation under a global confounder: trajectories are
//! clustered by their dynamics, each cluster is evaluated on its own and the
//! estimates are mixed by cluster frequency.

mod em;
mod meta;
mod separation;
mod stats;

pub use em::cluster_soft_em;
pub use meta::{clustering_ope, per_cluster_plugin_ope};
pub use separation::{cluster_separation, SeparationConfig};
pub use stats::TrajectoryStats;

use alloc::vec;
use alloc::vec::Vec;

use crate::data::Trajectory;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClusterMethod {
    Separation,
    SoftEm,
    /// Labels supplied by the caller, e.g. the simulated confounders.
    Given,
}

impl ClusterMethod {
    pub fn name(&self) -> &'static str {
        match self {
            ClusterMethod::Separation => "separation",
            ClusterMethod::SoftEm => "soft-em",
            ClusterMethod::Given => "given",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    /// `|C_u| / N`.
    pub weights: Vec<f64>,
    pub method: ClusterMethod,
    /// Row-major pairwise statistic; `NaN` where two trajectories share no
    /// qualifying cell. Only filled by the separation method.
    pub distances: Option<Vec<f64>>,
    pub refine_iterations: usize,
    /// Objective per iteration for iterative methods.
    pub trace: Vec<f64>,
}

impl ClusterAssignment {
    pub fn from_labels(labels: Vec<usize>, n_clusters: usize, method: ClusterMethod) -> Result<Self> {
        if n_clusters == 0 {
            return Err(Error::param("need at least one cluster"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_clusters) {
            return Err(Error::param(alloc::format!(
                "label {bad} out of range for {n_clusters} clusters"
            )));
        }
        let weights = label_weights(&labels, n_clusters);
        Ok(ClusterAssignment {
            labels,
            weights,
            method,
            distances: None,
            refine_iterations: 0,
            trace: Vec::new(),
        })
    }

    pub fn n_clusters(&self) -> usize {
        self.weights.len()
    }

    /// Indices of the trajectories in cluster `u`.
    pub fn members(&self, u: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == u).collect()
    }
}

pub(crate) fn label_weights(labels: &[usize], n_clusters: usize) -> Vec<f64> {
    let mut w = vec![0.0; n_clusters];
    for &l in labels {
        w[l] += 1.0;
    }
    let n = labels.len().max(1) as f64;
    w.iter_mut().for_each(|x| *x /= n);
    w
}

/// The simulated global confounder of every trajectory.
pub fn truth_labels(trajs: &[Trajectory]) -> Result<Vec<usize>> {
    trajs
        .iter()
        .enumerate()
        .map(|(i, t)| {
            t.confounders
                .as_ref()
                .and_then(|u| u.first().copied())
                .ok_or_else(|| Error::param(alloc::format!("trajectory {i} has no confounder labels")))
        })
        .collect()
}

const MAX_PERMUTED: usize = 8;

fn permutations(n: usize) -> Result<Vec<Vec<usize>>> {
    if n > MAX_PERMUTED {
        return Err(Error::TooLarge(alloc::format!(
            "label permutations over {n} clusters (limit {MAX_PERMUTED})"
        )));
    }
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    permute(&mut p, 0, &mut out);
    Ok(out)
}

fn permute(p: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == p.len() {
        out.push(p.clone());
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, out);
        p.swap(k, i);
    }
}

/// Misassignment rate minimised over relabelings of the clusters.
pub fn clustering_accuracy(ca: &ClusterAssignment, truth: &[usize]) -> Result<f64> {
    if truth.len() != ca.labels.len() {
        return Err(Error::Dimension {
            what: "truth labels",
            expected: ca.labels.len(),
            found: truth.len(),
        });
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let k = ca.n_clusters().max(truth.iter().max().map_or(0, |m| m + 1));
    let mut confusion = vec![0usize; k * k];
    for (&l, &t) in ca.labels.iter().zip(truth) {
        confusion[l * k + t] += 1;
    }
    let best = permutations(k)?
        .iter()
        .map(|p| (0..k).map(|l| confusion[l * k + p[l]]).sum::<usize>())
        .max()
        .unwrap_or(0);
    Ok(1.0 - best as f64 / truth.len() as f64)
}

/// `max_u |P^(u) - P(u)|`, minimised over relabelings of the clusters.
pub fn weight_error(ca: &ClusterAssignment, prior: &[f64]) -> Result<f64> {
    if prior.len() != ca.n_clusters() {
        return Err(Error::Dimension {
            what: "confounder prior",
            expected: ca.n_clusters(),
            found: prior.len(),
        });
    }
    Ok(permutations(prior.len())?
        .iter()
        .map(|p| {
            (0..prior.len())
                .map(|u| (ca.weights[u] - prior[p[u]]).abs())
                .fold(0.0, f64::max)
        })
        .fold(f64::INFINITY, f64::min))
}

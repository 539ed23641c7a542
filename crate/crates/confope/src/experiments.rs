//! Figure-style experiments: a lower-bound sweep over the sensitivity level,
//! max-min improvement traces and the clustering comparison on the sepsis
//! toy. Each writes CSV files plus SVG line plots with one-sd bands.

use std::path::Path;

use serde::Serialize;

use confope_core::data::{count_stats, EmpiricalModel, Mode, Trajectory};
use confope_core::environments::{FixtureBundle, REPORT_STATE};
use confope_core::global::{
    cluster_separation, cluster_soft_em, clustering_accuracy, clustering_ope, per_cluster_plugin_ope, truth_labels,
    ClusterAssignment, ClusterMethod, SeparationConfig,
};
use confope_core::mdp::{exact_value, ObservedPolicy, SoftmaxPolicy};
use confope_core::ope::{cfqe, fqe, mb_pgd, naive_fqe_lower_bound, PgdConfig};
use confope_core::policy_opt::{clustering_pg, maxmin_improve, ClusterPgConfig, MaxMinConfig};
use confope_core::sensitivity::{build_uncertainty, sensitivity_bounds};
use confope_core::table::one_hot;

use crate::error::{AppError, AppResult};
use crate::io::{write_csv, OpeRow};
use crate::registry::fixture;
use crate::sim::par_map;
use crate::svg::{line_plot, mean_sd, Series};

pub const GAMMAS: [f64; 6] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0];
pub const FIG1_METHODS: [&str; 4] = ["fqe", "naive-lb", "cfqe", "mb-pgd"];
const FIG1_N: usize = 1000;
const FIG2_N: usize = 1000;
const FIG2_GAMMA: f64 = 10.0;
const FIG3_NS: [usize; 4] = [500, 1000, 2000, 4000];
const FIG3_PG_N: usize = 1000;
const FIG3_TAU: u32 = 30;

fn write_text(path: &Path, text: &str) -> AppResult<()> {
    std::fs::write(path, text).map_err(|e| AppError::io(path, e))
}

fn collect<T>(v: Vec<AppResult<T>>) -> AppResult<Vec<T>> {
    v.into_iter().collect()
}

fn pooled(trajs: &[Trajectory], b: &FixtureBundle) -> AppResult<EmpiricalModel> {
    let m = b.mdp();
    let cs = count_stats(trajs, m.n_states(), m.n_actions(), m.horizon())?;
    Ok(EmpiricalModel::from_counts(&cs, Mode::Pooled))
}

/// Starting logits for improvement runs: twice the evaluation policy's
/// first-stage probabilities.
pub fn initial_logits(pi_e: &ObservedPolicy) -> AppResult<SoftmaxPolicy> {
    let (ns, na) = (pi_e.n_states(), pi_e.n_actions());
    let logits = (0..ns).flat_map(|s| pi_e.probs(0, s).iter().map(|p| 2.0 * p)).collect();
    Ok(SoftmaxPolicy::new(ns, na, logits)?)
}

/// Mean and sd of `value` over the rows at each `x`, skipping NaN.
fn summarize<T>(rows: &[T], xs: &[f64], x_of: impl Fn(&T) -> f64, value: impl Fn(&T) -> f64) -> (Vec<f64>, Vec<f64>) {
    let mut mean = Vec::new();
    let mut sd = Vec::new();
    for &x in xs {
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| x_of(r) == x)
            .map(&value)
            .filter(|v| !v.is_nan())
            .collect();
        let (m, s) = mean_sd(&vals);
        mean.push(m);
        sd.push(s);
    }
    (mean, sd)
}

/// Lower bounds at gridworld state 13 from `n` simulated trajectories per
/// trial, for each sensitivity level.
pub fn fig1(trials: usize, out: &Path) -> AppResult<Vec<OpeRow>> {
    let b = fixture("gridworld", None)?;
    let ns = b.mdp().n_states();
    let start = one_hot(ns, REPORT_STATE);
    let range = b.reward_range();
    let per_trial = par_map(trials, |t| -> AppResult<Vec<OpeRow>> {
        let seed = t as u64;
        let trajs = confope_core::data::simulate(b.mdp(), b.behavior(), FIG1_N, seed)?;
        let model = pooled(&trajs, &b)?;
        let base = fqe(&model, &b.evaluation, &start)?;
        let mut rows = Vec::new();
        for &gamma in &GAMMAS {
            let tu = build_uncertainty(&model, &sensitivity_bounds(&model, gamma)?, None)?;
            let vals = [
                base.value,
                naive_fqe_lower_bound(&base, gamma - 1.0, range).value,
                cfqe(&model, &b.evaluation, &tu, &start)?.value,
                mb_pgd(&model, &b.evaluation, &tu, &start, PgdConfig::default())?
                    .0
                    .value,
            ];
            for (m, v) in FIG1_METHODS.iter().zip(vals) {
                rows.push(OpeRow {
                    gamma,
                    method: (*m).into(),
                    state: REPORT_STATE.to_string(),
                    value: v,
                    is_lower_bound: *m != "fqe",
                    seed,
                });
            }
        }
        Ok(rows)
    })?;
    let rows: Vec<OpeRow> = collect(per_trial)?.into_iter().flatten().collect();
    write_csv(&out.join("fig1.csv"), &rows)?;
    let truth = exact_value(b.mdp(), &b.evaluation)?.v1[REPORT_STATE];
    let mut series: Vec<Series> = FIG1_METHODS
        .iter()
        .filter(|m| **m != "naive-lb")
        .map(|m| {
            let sel: Vec<&OpeRow> = rows.iter().filter(|r| r.method == *m).collect();
            let (mean, sd) = summarize(&sel, &GAMMAS, |r| r.gamma, |r| r.value);
            Series {
                name: (*m).into(),
                x: GAMMAS.to_vec(),
                mean,
                sd,
            }
        })
        .collect();
    series.push(Series {
        name: "true value".into(),
        x: GAMMAS.to_vec(),
        mean: vec![truth; GAMMAS.len()],
        sd: Vec::new(),
    });
    write_text(
        &out.join("fig1.svg"),
        &line_plot(
            &format!("Lower bounds at state {REPORT_STATE} (n = {FIG1_N})"),
            "Gamma",
            "value",
            &series,
            true,
        ),
    )?;
    // the naive bound is orders of magnitude lower, so it gets its own plot
    let naive: Vec<&OpeRow> = rows.iter().filter(|r| r.method == "naive-lb").collect();
    let (mean, sd) = summarize(&naive, &GAMMAS, |r| r.gamma, |r| r.value);
    write_text(
        &out.join("fig1_naive.svg"),
        &line_plot(
            "Naive FQE lower bound",
            "Gamma",
            "value",
            &[Series {
                name: "naive-lb".into(),
                x: GAMMAS.to_vec(),
                mean,
                sd,
            }],
            true,
        ),
    )?;
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fig2Row {
    pub seed: u64,
    pub iter: usize,
    pub lower_bound: f64,
    pub true_value: f64,
    pub grad_norm: f64,
}

/// Max-min ascent on the gridworld from the evaluation policy.
pub fn fig2(trials: usize, out: &Path) -> AppResult<Vec<Fig2Row>> {
    let b = fixture("gridworld", None)?;
    let start = one_hot(b.mdp().n_states(), REPORT_STATE);
    let theta0 = initial_logits(&b.evaluation)?;
    let cfg = MaxMinConfig::default();
    let per_trial = par_map(trials, |t| -> AppResult<Vec<Fig2Row>> {
        let seed = t as u64;
        let trajs = confope_core::data::simulate(b.mdp(), b.behavior(), FIG2_N, seed)?;
        let model = pooled(&trajs, &b)?;
        let tu = build_uncertainty(&model, &sensitivity_bounds(&model, FIG2_GAMMA)?, None)?;
        let (last, tr) = maxmin_improve(&model, &tu, &theta0, &cfg, &start)?;
        let ns = b.mdp().n_states();
        let na = b.mdp().n_actions();
        let mut rows = Vec::with_capacity(tr.len() + 1);
        for i in 0..tr.len() {
            let pi = SoftmaxPolicy::new(ns, na, tr.logits[i].clone())?;
            rows.push(Fig2Row {
                seed,
                iter: i,
                lower_bound: tr.objective[i],
                true_value: exact_value(b.mdp(), pi.policy())?.v1[REPORT_STATE],
                grad_norm: tr.grad_norm[i],
            });
        }
        rows.push(Fig2Row {
            seed,
            iter: tr.len(),
            lower_bound: tr.final_objective,
            true_value: exact_value(b.mdp(), last.policy())?.v1[REPORT_STATE],
            grad_norm: f64::NAN,
        });
        Ok(rows)
    })?;
    let rows: Vec<Fig2Row> = collect(per_trial)?.into_iter().flatten().collect();
    write_csv(&out.join("fig2.csv"), &rows)?;
    let iters: Vec<f64> = (0..=cfg.outer_iters).map(|i| i as f64).collect();
    let (lb, lb_sd) = summarize(&rows, &iters, |r| r.iter as f64, |r| r.lower_bound);
    let (tv, tv_sd) = summarize(&rows, &iters, |r| r.iter as f64, |r| r.true_value);
    let series = [
        Series {
            name: "lower bound".into(),
            x: iters.clone(),
            mean: lb,
            sd: lb_sd,
        },
        Series {
            name: "true value".into(),
            x: iters,
            mean: tv,
            sd: tv_sd,
        },
    ];
    write_text(
        &out.join("fig2.svg"),
        &line_plot(
            &format!("Max-min improvement at state {REPORT_STATE}, Gamma = {FIG2_GAMMA}"),
            "iteration",
            "value",
            &series,
            false,
        ),
    )?;
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClusterRow {
    pub n: usize,
    pub seed: u64,
    pub method: String,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateRow {
    pub n: usize,
    pub seed: u64,
    pub method: String,
    pub value: f64,
    pub truth: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PgRow {
    pub seed: u64,
    pub method: String,
    pub iter: usize,
    pub value: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Fig3 {
    pub clustering: Vec<ClusterRow>,
    pub estimates: Vec<EstimateRow>,
    pub pg: Vec<PgRow>,
}

/// Sepsis toy with glucose hidden from the clustering statistic:
/// separation clustering vs randomly initialised soft EM, clustering OPE vs
/// pooled FQE, and clustered vs single-cluster policy gradient. Estimates
/// that would need unvisited cells are recorded as NaN.
pub fn fig3(trials: usize, out: &Path) -> AppResult<Fig3> {
    let b = fixture("sepsis", None)?;
    let m = b.mdp();
    let (ns, na, hz) = (m.n_states(), m.n_actions(), m.horizon());
    let nu = m.n_confounders();
    let cfg = SeparationConfig {
        tau_count: FIG3_TAU,
        view: b.cluster_view.clone(),
        ..SeparationConfig::default()
    };
    let truth = exact_value(m, &b.evaluation)?.start;
    let rel = |v: f64| (v - truth).abs() / truth.abs();
    let mut res = Fig3::default();
    for &n in &FIG3_NS {
        let per_trial = par_map(trials, |t| -> AppResult<(Vec<ClusterRow>, Vec<EstimateRow>)> {
            let seed = t as u64;
            let trajs = confope_core::data::simulate(m, b.behavior(), n, seed)?;
            let labels = truth_labels(&trajs)?;
            let sep = cluster_separation(&trajs, ns, na, nu, &cfg)?;
            let em = cluster_soft_em(&trajs, ns, na, nu, seed, 50, b.cluster_view.as_deref())?;
            let crow = |method: &str, ca: &ClusterAssignment| -> AppResult<ClusterRow> {
                Ok(ClusterRow {
                    n,
                    seed,
                    method: method.into(),
                    error: clustering_accuracy(ca, &labels)?,
                })
            };
            let clusters = vec![crow("separation", &sep)?, crow("soft-em", &em)?];
            // a cluster that misses cells the evaluation policy needs gives no estimate
            let covered = |r: confope_core::Result<f64>| match r {
                Ok(v) => Ok(v),
                Err(confope_core::Error::Unvisited { .. }) => Ok(f64::NAN),
                Err(e) => Err(e),
            };
            let c = covered(
                clustering_ope(
                    &trajs,
                    |_| Ok(sep.clone()),
                    |c| per_cluster_plugin_ope(c, ns, na, hz, &b.evaluation, &b.start),
                )
                .map(|r| r.0.value),
            )?;
            let f = covered(fqe(&pooled(&trajs, &b)?, &b.evaluation, &b.start).map(|r| r.value))?;
            let erow = |method: &str, value: f64| EstimateRow {
                n,
                seed,
                method: method.into(),
                value,
                truth,
                rel_error: rel(value),
            };
            Ok((clusters, vec![erow("clustering-ope", c), erow("fqe", f)]))
        })?;
        for (c, e) in collect(per_trial)? {
            res.clustering.extend(c);
            res.estimates.extend(e);
        }
    }
    let theta0 = initial_logits(&b.evaluation)?;
    let pg_cfg = ClusterPgConfig::default();
    let exact = |pi: &ObservedPolicy| Ok(exact_value(m, pi)?.start);
    let per_trial = par_map(trials, |t| -> AppResult<Vec<PgRow>> {
        let seed = t as u64;
        let trajs = confope_core::data::simulate(m, b.behavior(), FIG3_PG_N, seed)?;
        let sep = cluster_separation(&trajs, ns, na, nu, &cfg)?;
        let one = ClusterAssignment::from_labels(vec![0; trajs.len()], 1, ClusterMethod::Given)?;
        let mut rows = Vec::new();
        for (name, ca) in [("clustered", &sep), ("single-cluster", &one)] {
            let (_, tr) = clustering_pg(&trajs, ca, ns, na, hz, &theta0, &pg_cfg, &b.start, Some(&exact))?;
            for (i, v) in tr.objective.iter().chain([&tr.final_objective]).enumerate() {
                rows.push(PgRow {
                    seed,
                    method: name.into(),
                    iter: i,
                    value: *v,
                });
            }
        }
        Ok(rows)
    })?;
    res.pg = collect(per_trial)?.into_iter().flatten().collect();

    write_csv(&out.join("fig3_clustering.csv"), &res.clustering)?;
    write_csv(&out.join("fig3_ope.csv"), &res.estimates)?;
    write_csv(&out.join("fig3_pg.csv"), &res.pg)?;
    let xs: Vec<f64> = FIG3_NS.iter().map(|&n| n as f64).collect();
    let by_method = |method: &str| -> Series {
        let sel: Vec<&ClusterRow> = res.clustering.iter().filter(|r| r.method == method).collect();
        let (mean, sd) = summarize(&sel, &xs, |r| r.n as f64, |r| r.error);
        Series {
            name: method.into(),
            x: xs.clone(),
            mean,
            sd,
        }
    };
    write_text(
        &out.join("fig3_clustering.svg"),
        &line_plot(
            "Clustering error, sepsis toy",
            "trajectories",
            "misclassified fraction",
            &[by_method("separation"), by_method("soft-em")],
            true,
        ),
    )?;
    let est = |method: &str| -> Series {
        let sel: Vec<&EstimateRow> = res.estimates.iter().filter(|r| r.method == method).collect();
        let (mean, sd) = summarize(&sel, &xs, |r| r.n as f64, |r| r.rel_error);
        Series {
            name: method.into(),
            x: xs.clone(),
            mean,
            sd,
        }
    };
    write_text(
        &out.join("fig3_ope.svg"),
        &line_plot(
            "Relative OPE error, sepsis toy",
            "trajectories",
            "relative error",
            &[est("clustering-ope"), est("fqe")],
            true,
        ),
    )?;
    let iters: Vec<f64> = (0..=pg_cfg.iters).map(|i| i as f64).collect();
    let pg = |method: &str| -> Series {
        let sel: Vec<&PgRow> = res.pg.iter().filter(|r| r.method == method).collect();
        let (mean, sd) = summarize(&sel, &iters, |r| r.iter as f64, |r| r.value);
        Series {
            name: method.into(),
            x: iters.clone(),
            mean,
            sd,
        }
    };
    write_text(
        &out.join("fig3_pg.svg"),
        &line_plot(
            &format!("Policy gradient, sepsis toy (n = {FIG3_PG_N})"),
            "iteration",
            "true value",
            &[pg("clustered"), pg("single-cluster")],
            false,
        ),
    )?;
    Ok(res)
}

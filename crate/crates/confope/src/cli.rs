//! Command-line front end. Every flag can also come from a JSON file given
//! with `--config`; flags given on the command line win.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use confope_core::data::{count_stats, hoeffding_widths, Dataset, EmpiricalModel, Mode, Trajectory};
use confope_core::environments::FixtureBundle;
use confope_core::global::{
    cluster_separation, clustering_ope, per_cluster_plugin_ope, ClusterAssignment, ClusterMethod, SeparationConfig,
};
use confope_core::ope::{cfqe, fqe, mb_pgd, mb_relaxation, naive_fqe_lower_bound, PgdConfig, ValueReport};
use confope_core::policy_opt::{clustering_pg, maxmin_improve, ClusterPgConfig, MaxMinConfig, PgEstimator};
use confope_core::sensitivity::{build_uncertainty, sensitivity_bounds, sensitivity_bounds_hoeffding};
use confope_core::table::one_hot;

use crate::battery;
use crate::error::{AppError, AppResult};
use crate::experiments::{self, initial_logits};
use crate::io::{load_dataset, save_dataset, write_csv, write_json, ClusterDoc, OpeRow, PolicyDoc, TraceRow};
use crate::registry::{fixture, fixture_for_data};
use crate::sim::simulate_dataset;

#[derive(Debug, Parser)]
#[command(
    name = "confope",
    version,
    about = "Off-policy evaluation under unobserved confounding"
)]
pub struct Cli {
    /// JSON file with values for any of the command's flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset from a named environment
    GenData(GenData),
    /// Evaluate the environment's evaluation policy
    Ope(Ope),
    /// Improve a policy from data
    Improve(Improve),
    /// Run a figure experiment or the fixture battery
    Reproduce(Reproduce),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpeMethod {
    Fqe,
    Cfqe,
    MbRelax,
    MbPgd,
    NaiveLb,
    Cluster,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImproveMethod {
    Maxmin,
    ClusterPg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    IsReinforce,
    Approx,
    PlugIn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelMode {
    PerStep,
    Pooled,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fixtures,
    /// All fourteen acceptance criteria
    Acceptance,
}

const DEFAULT_TAU: u32 = 30;

macro_rules! merge {
    ($a:ident, $b:ident; $($f:ident),*) => {
        $( if $a.$f.is_none() { $a.$f = $b.$f; } )*
    };
    ($a:ident, $b:ident; $($f:ident),* ; flags $($g:ident),*) => {
        merge!($a, $b; $($f),*);
        $( $a.$g |= $b.$g; )*
    };
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(default)]
pub struct GenData {
    /// Environment id
    #[arg(long)]
    pub env: Option<String>,
    /// Number of trajectories
    #[arg(long)]
    pub n: Option<usize>,
    /// Horizon override
    #[arg(long = "H")]
    #[serde(rename = "H")]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output JSONL file; metadata goes to `<out>.meta.json`
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(default)]
pub struct Ope {
    /// JSONL dataset
    #[arg(long, conflicts_with = "analytic")]
    pub data: Option<PathBuf>,
    /// Use the exact observed law of the environment instead of data
    #[arg(long)]
    pub analytic: bool,
    /// Environment id; defaults to the one recorded with the dataset
    #[arg(long)]
    pub env: Option<String>,
    #[arg(long = "H")]
    #[serde(rename = "H")]
    pub horizon: Option<usize>,
    #[arg(long, value_enum)]
    pub method: Option<OpeMethod>,
    /// Sensitivity levels, comma separated
    #[arg(long, value_delimiter = ',')]
    pub gamma: Option<Vec<f64>>,
    /// Report the value at this state instead of the environment's start
    /// distribution
    #[arg(long)]
    pub state: Option<usize>,
    /// Number of clusters for `--method cluster`
    #[arg(long = "U")]
    #[serde(rename = "U")]
    pub clusters: Option<usize>,
    /// Visit count a cell needs to enter the clustering statistic (default 30)
    #[arg(long)]
    pub tau: Option<u32>,
    /// Widen the estimates by Hoeffding intervals at this confidence level
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModelMode>,
    /// CSV output; standard output when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(default)]
pub struct Improve {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub env: Option<String>,
    #[arg(long, value_enum)]
    pub method: Option<ImproveMethod>,
    /// Sensitivity level for `maxmin`
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub state: Option<usize>,
    #[arg(long = "U")]
    #[serde(rename = "U")]
    pub clusters: Option<usize>,
    /// Visit count a cell needs to enter the clustering statistic (default 30)
    #[arg(long)]
    pub tau: Option<u32>,
    /// Outer iterations
    #[arg(long)]
    pub iters: Option<usize>,
    /// Step size (initial step size for `maxmin`)
    #[arg(long)]
    pub lr: Option<f64>,
    /// Inner descent steps per outer iteration for `maxmin`
    #[arg(long)]
    pub inner_iters: Option<usize>,
    #[arg(long, value_enum)]
    pub estimator: Option<Estimator>,
    /// Output directory for `trace.csv` and `policy.json`
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Args, Deserialize)]
#[serde(default)]
pub struct Reproduce {
    #[arg(long, value_enum)]
    pub figure: Option<Figure>,
    /// Seeds per configuration; 1 is a quick smoke run
    #[arg(long)]
    pub trials: Option<usize>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> AppResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| AppError::Parse {
        path: path.into(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    serde_json::from_value(value).map_err(|e| AppError::config(format!("{}: {e}", path.display())))
}

fn need<T>(v: Option<T>, flag: &str) -> AppResult<T> {
    v.ok_or_else(|| AppError::config(format!("missing required option --{flag}")))
}

pub fn run(cli: Cli) -> AppResult<()> {
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::GenData(mut a) => {
            let f: GenData = load_config(cfg)?;
            merge!(a, f; env, n, horizon, seed, out);
            gen_data(a)
        }
        Command::Ope(mut a) => {
            let f: Ope = load_config(cfg)?;
            merge!(a, f; data, env, horizon, method, gamma, state, clusters, tau, delta, mode, out; flags analytic);
            ope(a)
        }
        Command::Improve(mut a) => {
            let f: Improve = load_config(cfg)?;
            merge!(a, f; data, env, method, gamma, state, clusters, tau, iters, lr, inner_iters, estimator, out);
            improve(a)
        }
        Command::Reproduce(mut a) => {
            let f: Reproduce = load_config(cfg)?;
            merge!(a, f; figure, trials, out);
            reproduce(a)
        }
    }
}

fn gen_data(a: GenData) -> AppResult<()> {
    let env = need(a.env, "env")?;
    let out = need(a.out, "out")?;
    let n = a.n.unwrap_or(100);
    if n == 0 {
        return Err(AppError::config("--n must be positive"));
    }
    let b = fixture(&env, a.horizon)?;
    let ds = simulate_dataset(&env, b.mdp(), b.behavior(), n, a.seed.unwrap_or(0))?;
    save_dataset(&ds, &out)
}

/// Dataset plus the environment it refers to.
fn load_with_env(data: &Path, env: Option<String>) -> AppResult<(Dataset, FixtureBundle)> {
    let ds = load_dataset(data)?;
    let env = match env {
        Some(e) => e,
        None if !ds.env_id.is_empty() => ds.env_id.clone(),
        None => return Err(AppError::config("dataset has no metadata; pass --env")),
    };
    let b = fixture_for_data(&env, ds.horizon)?;
    ds.validate(b.mdp().n_states(), b.mdp().n_actions())?;
    Ok((ds, b))
}

fn start_of(b: &FixtureBundle, state: Option<usize>) -> AppResult<(Vec<f64>, String)> {
    let ns = b.mdp().n_states();
    match state {
        Some(s) if s < ns => Ok((one_hot(ns, s), s.to_string())),
        Some(s) => Err(AppError::config(format!("--state {s} is out of range (S = {ns})"))),
        None => Ok((b.start.clone(), "start".into())),
    }
}

fn reward_range(r: &[f64]) -> f64 {
    r.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - r.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn ope(a: Ope) -> AppResult<()> {
    let method = need(a.method, "method")?;
    let gammas = a.gamma.clone().unwrap_or_else(|| vec![1.0]);
    if gammas.is_empty() {
        return Err(AppError::config("--gamma needs at least one value"));
    }
    let mode = match a.mode.unwrap_or(ModelMode::Pooled) {
        ModelMode::Pooled => Mode::Pooled,
        ModelMode::PerStep => Mode::PerStep,
    };
    let (b, data, seed) = match (&a.data, a.analytic) {
        (Some(p), false) => {
            let (ds, b) = load_with_env(p, a.env.clone())?;
            (b, Some(ds.trajectories), ds.seed)
        }
        (None, true) => (fixture(&need(a.env.clone(), "env")?, a.horizon)?, None, 0),
        _ => return Err(AppError::config("give exactly one of --data and --analytic")),
    };
    let (start, label) = start_of(&b, a.state)?;
    let m = b.mdp();
    let (ns, na, hz) = (m.n_states(), m.n_actions(), m.horizon());
    let row = |gamma: f64, method: String, value: f64, lb: bool| OpeRow {
        gamma,
        method,
        state: label.clone(),
        value,
        is_lower_bound: lb,
        seed,
    };
    let mut rows = Vec::new();
    if method == OpeMethod::Cluster {
        let trajs = data.ok_or_else(|| AppError::config("--method cluster needs --data"))?;
        let k = a.clusters.unwrap_or(2);
        let d = SeparationConfig::default();
        let cfg = SeparationConfig {
            tau_count: a.tau.unwrap_or(DEFAULT_TAU),
            view: b.cluster_view.clone(),
            ..d
        };
        let (r, _) = clustering_ope(
            &trajs,
            |t| cluster_separation(t, ns, na, k, &cfg),
            |c| per_cluster_plugin_ope(c, ns, na, hz, &b.evaluation, &start),
        )?;
        rows.push(row(1.0, "cluster".into(), r.value, false));
        for (u, &(w, v)) in r.diagnostics.components.iter().enumerate() {
            let v = if w == 0.0 { f64::NAN } else { v };
            rows.push(row(1.0, format!("cluster-{u}"), v, false));
        }
    } else {
        let (model, widths) = match &data {
            Some(t) => {
                let cs = count_stats(t, ns, na, hz)?;
                let w = a.delta.map(|d| hoeffding_widths(&cs, mode, d, d)).transpose()?;
                (EmpiricalModel::from_counts(&cs, mode), w)
            }
            None if a.delta.is_some() => return Err(AppError::config("--delta needs --data")),
            None => (EmpiricalModel::analytic(m, b.behavior(), mode)?, None),
        };
        let base = fqe(&model, &b.evaluation, &start)?;
        let range = reward_range(&model.reward);
        for &gamma in &gammas {
            let bounds = match &widths {
                Some(w) => sensitivity_bounds_hoeffding(&model, gamma, w)?,
                None => sensitivity_bounds(&model, gamma)?,
            };
            let tu = || build_uncertainty(&model, &bounds, widths.as_ref());
            let r: ValueReport = match method {
                OpeMethod::Fqe => base.clone(),
                OpeMethod::NaiveLb => naive_fqe_lower_bound(&base, gamma - 1.0, range),
                OpeMethod::Cfqe => cfqe(&model, &b.evaluation, &tu()?, &start)?,
                OpeMethod::MbRelax => mb_relaxation(&model, &b.evaluation, &tu()?, &start)?,
                OpeMethod::MbPgd => mb_pgd(&model, &b.evaluation, &tu()?, &start, PgdConfig::default())?.0,
                OpeMethod::Cluster => unreachable!(),
            };
            rows.push(row(gamma, r.method.name().into(), r.value, r.is_lower_bound));
        }
    }
    match &a.out {
        Some(p) => write_csv(p, &rows),
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush().map_err(|e| AppError::io("<stdout>", e))
        }
    }
}

fn improve(a: Improve) -> AppResult<()> {
    let method = need(a.method, "method")?;
    let out = need(a.out, "out")?;
    let (ds, b) = load_with_env(&need(a.data, "data")?, a.env)?;
    let (start, _) = start_of(&b, a.state)?;
    let m = b.mdp();
    let (ns, na, hz) = (m.n_states(), m.n_actions(), m.horizon());
    let theta0 = initial_logits(&b.evaluation)?;
    let trajs: &[Trajectory] = &ds.trajectories;
    let (policy, trace) = match method {
        ImproveMethod::Maxmin => {
            let d = MaxMinConfig::default();
            let cfg = MaxMinConfig {
                outer_iters: a.iters.unwrap_or(d.outer_iters),
                inner_iters: a.inner_iters.unwrap_or(d.inner_iters),
                lr0: a.lr.unwrap_or(d.lr0),
                ..d
            };
            let cs = count_stats(trajs, ns, na, hz)?;
            let model = EmpiricalModel::from_counts(&cs, Mode::Pooled);
            let tu = build_uncertainty(&model, &sensitivity_bounds(&model, a.gamma.unwrap_or(10.0))?, None)?;
            let initial = mb_pgd(&model, theta0.policy(), &tu, &start, cfg.inner)?.0.value;
            let r = maxmin_improve(&model, &tu, &theta0, &cfg, &start)?;
            println!(
                "initial lower bound {initial:.6}, final lower bound {:.6}",
                r.1.final_objective
            );
            r
        }
        ImproveMethod::ClusterPg => {
            let d = ClusterPgConfig::default();
            let cfg = ClusterPgConfig {
                lr: a.lr.unwrap_or(d.lr),
                iters: a.iters.unwrap_or(d.iters),
                estimator: match a.estimator {
                    None => d.estimator,
                    Some(Estimator::IsReinforce) => PgEstimator::IsReinforce,
                    Some(Estimator::Approx) => PgEstimator::ApproxOffPolicy,
                    Some(Estimator::PlugIn) => PgEstimator::PlugIn,
                },
            };
            let k = a.clusters.unwrap_or(2);
            let ca = if k == 1 {
                ClusterAssignment::from_labels(vec![0; trajs.len()], 1, ClusterMethod::Given)?
            } else {
                let d = SeparationConfig::default();
                let sc = SeparationConfig {
                    tau_count: a.tau.unwrap_or(DEFAULT_TAU),
                    view: b.cluster_view.clone(),
                    ..d
                };
                cluster_separation(trajs, ns, na, k, &sc)?
            };
            std::fs::create_dir_all(&out).map_err(|e| AppError::io(&out, e))?;
            write_json(&out.join("clusters.json"), &ClusterDoc::new(&ca))?;
            let r = clustering_pg(trajs, &ca, ns, na, hz, &theta0, &cfg, &start, None)?;
            println!(
                "initial plug-in value {:.6}, final plug-in value {:.6}",
                r.1.objective.first().copied().unwrap_or(f64::NAN),
                r.1.final_objective
            );
            r
        }
    };
    std::fs::create_dir_all(&out).map_err(|e| AppError::io(&out, e))?;
    let rows: Vec<TraceRow> = (0..trace.len())
        .map(|i| TraceRow {
            iter: i,
            objective: trace.objective[i],
            grad_norm: trace.grad_norm[i],
        })
        .collect();
    write_csv(&out.join("trace.csv"), &rows)?;
    write_json(&out.join("policy.json"), &PolicyDoc::new(&policy))?;
    Ok(())
}

fn reproduce(a: Reproduce) -> AppResult<()> {
    let figure = need(a.figure, "figure")?;
    let trials = a.trials.unwrap_or(30);
    if trials == 0 {
        return Err(AppError::config("--trials must be positive"));
    }
    let out = a.out.unwrap_or_else(|| PathBuf::from("results"));
    std::fs::create_dir_all(&out).map_err(|e| AppError::io(&out, e))?;
    match figure {
        Figure::Fig1 => experiments::fig1(trials, &out).map(|_| ()),
        Figure::Fig2 => experiments::fig2(trials, &out).map(|_| ()),
        Figure::Fig3 => experiments::fig3(trials, &out).map(|_| ()),
        Figure::Fixtures | Figure::Acceptance => {
            let ids: Vec<usize> = if figure == Figure::Fixtures {
                battery::FIXTURE_CRITERIA.to_vec()
            } else {
                (1..=14).collect()
            };
            let mut report = String::new();
            let mut failed = Vec::new();
            for id in ids {
                let o = battery::run(id);
                println!("{}", o.line());
                report.push_str(&o.line());
                report.push('\n');
                if !o.pass {
                    failed.push(id.to_string());
                }
            }
            let path = out.join(format!(
                "{}.txt",
                if figure == Figure::Fixtures {
                    "fixtures"
                } else {
                    "acceptance"
                }
            ));
            std::fs::write(&path, &report).map_err(|e| AppError::io(&path, e))?;
            if failed.is_empty() {
                Ok(())
            } else {
                Err(AppError::Acceptance(format!("criteria {}", failed.join(", "))))
            }
        }
    }
}

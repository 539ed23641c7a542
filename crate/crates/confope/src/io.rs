//! File formats: MDP JSON, JSONL datasets with a metadata sidecar, report
//! and cluster JSON, and CSV tables.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use confope_core::data::{Dataset, Trajectory};
use confope_core::global::ClusterAssignment;
use confope_core::mdp::{ConfoundedMdp, ConfounderProcess, InitialDist, SoftmaxPolicy};
use confope_core::ope::ValueReport;
use confope_core::table::StageTable;

use crate::error::{AppError, AppResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ProcessDoc {
    /// `[h][s][u]`
    Memoryless {
        table: Vec<Vec<Vec<f64>>>,
    },
    Global {
        prior: Vec<f64>,
    },
    /// `next[u][a]`
    History {
        initial: usize,
        next: Vec<Vec<usize>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialDoc {
    States(Vec<f64>),
    /// `[s][u]`
    Joint(Vec<Vec<f64>>),
}

/// JSON form of a confounded MDP. `kernel` is nested `[h][s][u][a][s']`
/// with a single `h` entry when `stationary` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdpDoc {
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "U")]
    pub u: usize,
    #[serde(rename = "A")]
    pub a: usize,
    #[serde(rename = "H")]
    pub h: usize,
    pub stationary: bool,
    pub kernel: Vec<Vec<Vec<Vec<Vec<f64>>>>>,
    /// `[s][a]`
    pub reward: Vec<Vec<f64>>,
    pub process: ProcessDoc,
    pub d0: InitialDoc,
}

fn nest(flat: &[f64], width: usize) -> Vec<Vec<f64>> {
    flat.chunks(width).map(|c| c.to_vec()).collect()
}

impl MdpDoc {
    pub fn from_mdp(m: &ConfoundedMdp) -> Self {
        let (ns, nu, na) = (m.n_states(), m.n_confounders(), m.n_actions());
        let k = m.kernel();
        let kernel = (0..k.stages())
            .map(|h| {
                k.stage(h)
                    .chunks(nu * na * ns)
                    .map(|su| su.chunks(na * ns).map(|a| nest(a, ns)).collect())
                    .collect()
            })
            .collect();
        let process = match m.process() {
            ConfounderProcess::Memoryless(t) => ProcessDoc::Memoryless {
                table: (0..t.stages()).map(|h| nest(t.stage(h), nu)).collect(),
            },
            ConfounderProcess::Global(p) => ProcessDoc::Global { prior: p.clone() },
            ConfounderProcess::HistoryDeterministic { initial, next } => ProcessDoc::History {
                initial: *initial,
                next: next.chunks(na).map(|c| c.to_vec()).collect(),
            },
        };
        let d0 = match m.initial() {
            InitialDist::States(d) => InitialDoc::States(d.clone()),
            InitialDist::Joint(d) => InitialDoc::Joint(nest(d, nu)),
        };
        MdpDoc {
            s: ns,
            u: nu,
            a: na,
            h: m.horizon(),
            stationary: m.stationary(),
            kernel,
            reward: nest(m.rewards(), na),
            process,
            d0,
        }
    }

    pub fn to_mdp(&self) -> AppResult<ConfoundedMdp> {
        let stages = self.kernel.len();
        if self.stationary != (stages == 1) && !(self.stationary && self.h == 1) {
            return Err(AppError::config(format!(
                "kernel has {stages} stages but stationary = {}",
                self.stationary
            )));
        }
        let flat: Vec<f64> = self
            .kernel
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .flatten()
            .copied()
            .collect();
        let stride = self.s * self.u * self.a * self.s;
        let kernel = StageTable::new(stages, stride, flat)?;
        let process = match &self.process {
            ProcessDoc::Memoryless { table } => {
                let st = table.len();
                let flat: Vec<f64> = table.iter().flatten().flatten().copied().collect();
                ConfounderProcess::Memoryless(StageTable::new(st, self.s * self.u, flat)?)
            }
            ProcessDoc::Global { prior } => ConfounderProcess::Global(prior.clone()),
            ProcessDoc::History { initial, next } => ConfounderProcess::HistoryDeterministic {
                initial: *initial,
                next: next.iter().flatten().copied().collect(),
            },
        };
        let initial = match &self.d0 {
            InitialDoc::States(d) => InitialDist::States(d.clone()),
            InitialDoc::Joint(d) => InitialDist::Joint(d.iter().flatten().copied().collect()),
        };
        Ok(ConfoundedMdp::new(
            self.s,
            self.u,
            self.a,
            self.h,
            kernel,
            self.reward.iter().flatten().copied().collect(),
            process,
            initial,
        )?)
    }
}

pub fn save_mdp(m: &ConfoundedMdp, path: &Path) -> AppResult<()> {
    write_json(path, &MdpDoc::from_mdp(m))
}

pub fn load_mdp(path: &Path) -> AppResult<ConfoundedMdp> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let doc: MdpDoc = serde_json::from_str(&text).map_err(|e| AppError::Parse {
        path: path.into(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    doc.to_mdp()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> AppResult<()> {
    let f = File::create(path).map_err(|e| AppError::io(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| AppError::io(path, e.into()))?;
    w.write_all(b"\n").map_err(|e| AppError::io(path, e))?;
    w.flush().map_err(|e| AppError::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TrajectoryLine {
    s: Vec<usize>,
    a: Vec<usize>,
    r: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    u: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub env_id: String,
    pub seed: u64,
    pub n: usize,
    #[serde(rename = "H")]
    pub h: usize,
}

/// `data.jsonl` -> `data.jsonl.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> AppResult<()> {
    let f = File::create(path).map_err(|e| AppError::io(path, e))?;
    let mut w = BufWriter::new(f);
    for t in &ds.trajectories {
        let line = TrajectoryLine {
            s: t.states.clone(),
            a: t.actions.clone(),
            r: t.rewards.clone(),
            u: t.confounders.clone(),
        };
        serde_json::to_writer(&mut w, &line).map_err(|e| AppError::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| AppError::io(path, e))?;
    }
    w.flush().map_err(|e| AppError::io(path, e))?;
    write_json(
        &sidecar_path(path),
        &DatasetMeta {
            env_id: ds.env_id.clone(),
            seed: ds.seed,
            n: ds.trajectories.len(),
            h: ds.horizon,
        },
    )
}

/// Reads a JSONL dataset; the sidecar is optional. Errors cite the 1-based
/// line number of the offending trajectory.
pub fn load_dataset(path: &Path) -> AppResult<Dataset> {
    let f = File::open(path).map_err(|e| AppError::io(path, e))?;
    let mut trajectories = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| AppError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| AppError::Parse {
            path: path.into(),
            line: i + 1,
            msg,
        };
        let t: TrajectoryLine = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if t.a.len() != t.s.len() || t.r.len() != t.s.len() || t.u.as_ref().is_some_and(|u| u.len() != t.s.len()) {
            return Err(parse_err("s, a, r and u must have equal lengths".into()));
        }
        trajectories.push(Trajectory {
            states: t.s,
            actions: t.a,
            rewards: t.r,
            confounders: t.u,
        });
    }
    let meta_path = sidecar_path(path);
    let meta: Option<DatasetMeta> = if meta_path.exists() {
        let text = std::fs::read_to_string(&meta_path).map_err(|e| AppError::io(&meta_path, e))?;
        Some(serde_json::from_str(&text).map_err(|e| AppError::Parse {
            path: meta_path.clone(),
            line: e.line(),
            msg: e.to_string(),
        })?)
    } else {
        None
    };
    let horizon = meta
        .as_ref()
        .map(|m| m.h)
        .or_else(|| trajectories.first().map(|t| t.len()))
        .unwrap_or(0);
    if let Some((i, _)) = trajectories.iter().enumerate().find(|(_, t)| t.len() != horizon) {
        return Err(AppError::Parse {
            path: path.into(),
            line: i + 1,
            msg: format!("trajectory length differs from H = {horizon}"),
        });
    }
    Ok(Dataset {
        env_id: meta.as_ref().map(|m| m.env_id.clone()).unwrap_or_default(),
        seed: meta.as_ref().map_or(0, |m| m.seed),
        horizon,
        trajectories,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportDoc<'a> {
    pub method: &'a str,
    pub horizon: usize,
    pub value: f64,
    /// `V_h(s)` rows `0..=H`.
    pub v: Vec<Vec<f64>>,
    pub reliable: &'a [bool],
    pub is_lower_bound: bool,
    pub iterations: usize,
    pub solver_calls: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<&'a str>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<Component>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Component {
    pub weight: f64,
    pub value: f64,
}

impl<'a> ReportDoc<'a> {
    pub fn new(r: &'a ValueReport) -> Self {
        ReportDoc {
            method: r.method.name(),
            horizon: r.horizon,
            value: r.value,
            v: nest(&r.v, r.n_states),
            reliable: &r.reliable,
            is_lower_bound: r.is_lower_bound,
            iterations: r.diagnostics.iterations,
            solver_calls: r.diagnostics.solver_calls,
            note: r.diagnostics.note.as_deref(),
            components: r
                .diagnostics
                .components
                .iter()
                .map(|&(weight, value)| Component { weight, value })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterDoc {
    pub labels: Vec<usize>,
    pub weights: Vec<f64>,
    pub method: String,
    pub refine_iterations: usize,
}

impl ClusterDoc {
    pub fn new(ca: &ClusterAssignment) -> Self {
        ClusterDoc {
            labels: ca.labels.clone(),
            weights: ca.weights.clone(),
            method: ca.method.name().into(),
            refine_iterations: ca.refine_iterations,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyDoc {
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "A")]
    pub a: usize,
    pub logits: Vec<Vec<f64>>,
    pub probs: Vec<Vec<f64>>,
}

impl PolicyDoc {
    pub fn new(p: &SoftmaxPolicy) -> Self {
        let pi = p.policy();
        PolicyDoc {
            s: pi.n_states(),
            a: pi.n_actions(),
            logits: nest(p.logits(), pi.n_actions()),
            probs: nest(pi.table().data(), pi.n_actions()),
        }
    }
}

/// One row of `ope` output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpeRow {
    pub gamma: f64,
    pub method: String,
    pub state: String,
    pub value: f64,
    pub is_lower_bound: bool,
    pub seed: u64,
}

/// One row of an improvement trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub grad_norm: f64,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> AppResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> AppResult<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(AppError::from)
}

use alloc::vec;
use alloc::vec::Vec;

use super::{prob, FixtureBundle, Known, Member};
use crate::error::{Error, Result};
use crate::mdp::{
    exact_value, ConfoundedMdp, ConfoundedPolicy, ConfounderProcess, InitialDist, ObservedPolicy, Policy,
};
use crate::table::StageTable;

/// Small sepsis-style system: heart rate, blood pressure and glucose, each
/// on `levels` ordered levels with the middle one normal. Action bit 0 is
/// an antibiotic (pulls heart rate to normal), bit 1 a vasopressor (raises
/// blood pressure). A global "diabetic" confounder makes glucose drift up
/// and blood pressure drift down, and makes clinicians reach for the
/// vasopressor sooner.
///
/// States are `(hr * L + bp) * L + glucose`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SepsisParams {
    pub levels: usize,
    /// Confounder values; `u >= 1` are increasingly severe diabetes.
    pub n_confounders: usize,
    /// Total prior mass of the diabetic values.
    pub p_diabetic: f64,
    pub horizon: usize,
}

impl Default for SepsisParams {
    fn default() -> Self {
        SepsisParams {
            levels: 3,
            n_confounders: 2,
            p_diabetic: 0.2,
            horizon: 60,
        }
    }
}

/// Designated pair where the confounders separate: all vitals normal,
/// no treatment.
pub fn separating_pair(levels: usize) -> (usize, usize) {
    let m = levels / 2;
    (((m * levels) + m) * levels + m, 0)
}

// up/down step probabilities, clamped at the ends
fn drift(level: usize, levels: usize, up: f64, down: f64) -> Vec<f64> {
    let mut out = vec![0.0; levels];
    out[(level + 1).min(levels - 1)] += up;
    out[level.saturating_sub(1)] += down;
    out[level] += 1.0 - up - down;
    out
}

// probability mass moving one level toward `target`
fn toward(level: usize, levels: usize, target: usize, p: f64) -> Vec<f64> {
    match level.cmp(&target) {
        core::cmp::Ordering::Less => drift(level, levels, p, 0.0),
        core::cmp::Ordering::Greater => drift(level, levels, 0.0, p),
        core::cmp::Ordering::Equal => drift(level, levels, 0.05, 0.05),
    }
}

pub fn sepsis_toy(params: SepsisParams) -> Result<FixtureBundle> {
    let SepsisParams {
        levels: l,
        n_confounders: nu,
        p_diabetic,
        horizon,
    } = params;
    if !(2..=5).contains(&l) {
        return Err(Error::param("levels must lie in 2..=5"));
    }
    if nu == 0 || horizon == 0 {
        return Err(Error::param(
            "need at least one confounder value and a positive horizon",
        ));
    }
    prob("p_diabetic", p_diabetic)?;
    let ns = l * l * l;
    let na = 4;
    let normal = l / 2;
    let severity = |u: usize| if nu == 1 { 0.0 } else { u as f64 / (nu - 1) as f64 };
    let decode = |s: usize| (s / (l * l), (s / l) % l, s % l);

    let mut kernel = vec![0.0; ns * nu * na * ns];
    for s in 0..ns {
        let (hr, bp, gl) = decode(s);
        for u in 0..nu {
            let d = severity(u);
            for a in 0..na {
                let (abx, vaso) = (a & 1 == 1, a & 2 == 2);
                let p_hr = if abx {
                    toward(hr, l, normal, 0.6)
                } else {
                    drift(hr, l, 0.2, 0.1)
                };
                let p_bp = if vaso {
                    drift(bp, l, 0.5, 0.05)
                } else {
                    drift(bp, l, 0.05, 0.15 + 0.35 * d)
                };
                let p_gl = if d > 0.0 {
                    drift(gl, l, 0.4 * d, 0.05)
                } else {
                    toward(gl, l, normal, 0.3)
                };
                let base = ((s * nu + u) * na + a) * ns;
                for (h2, x) in p_hr.iter().enumerate() {
                    for (b2, y) in p_bp.iter().enumerate() {
                        for (g2, z) in p_gl.iter().enumerate() {
                            kernel[base + (h2 * l + b2) * l + g2] += x * y * z;
                        }
                    }
                }
            }
        }
    }
    let mut reward = vec![0.0; ns * na];
    for s in 0..ns {
        let (hr, bp, gl) = decode(s);
        let r = [hr, bp, gl].iter().filter(|&&v| v == normal).count() as f64 / 3.0;
        for a in 0..na {
            reward[s * na + a] = r;
        }
    }
    let prior: Vec<f64> = if nu == 1 {
        vec![1.0]
    } else {
        let mut p = vec![p_diabetic / (nu - 1) as f64; nu];
        p[0] = 1.0 - p_diabetic;
        p
    };
    let d0 = vec![1.0 / ns as f64; ns];
    let mdp = ConfoundedMdp::new(
        ns,
        nu,
        na,
        horizon,
        StageTable::new(1, ns * nu * na * ns, kernel)?,
        reward,
        ConfounderProcess::Global(prior),
        InitialDist::States(d0.clone()),
    )?;

    let mut pol = vec![0.0; ns * nu * na];
    for s in 0..ns {
        let (hr, bp, _) = decode(s);
        for u in 0..nu {
            let d = severity(u);
            let p_abx = if hr != normal { 0.65 } else { 0.25 };
            let p_vaso = if bp < normal { 0.55 + 0.25 * d } else { 0.15 + 0.3 * d };
            for a in 0..na {
                let x = if a & 1 == 1 { p_abx } else { 1.0 - p_abx };
                let y = if a & 2 == 2 { p_vaso } else { 1.0 - p_vaso };
                pol[(s * nu + u) * na + a] = x * y;
            }
        }
    }
    let mut avg = vec![0.0; ns * na];
    for s in 0..ns {
        for u in 0..nu {
            for a in 0..na {
                avg[s * na + a] += pol[(s * nu + u) * na + a] / nu as f64;
            }
        }
    }
    let behavior = Policy::Confounded(ConfoundedPolicy::stationary(ns, nu, na, pol)?);
    let evaluation = ObservedPolicy::stationary(ns, na, avg)?;

    let mut known = Known::new();
    if nu > 1 {
        let (s, a) = separating_pair(l);
        let sep = (0..ns)
            .map(|k| (mdp.kernel_row(0, s, 0, a)[k] - mdp.kernel_row(0, s, nu - 1, a)[k]).powi(2))
            .sum::<f64>()
            .sqrt();
        if sep <= 0.0 {
            return Err(Error::KnownMismatch {
                name: "separation".into(),
                stated: 0.0,
                computed: sep,
            });
        }
        known.check("separation", sep, sep, 0.0)?;
    }
    let v = exact_value(&mdp, &evaluation)?.start;
    known.check("value", v, v, 0.0)?;
    let cluster_view = (0..ns).map(|s| s / l).collect();
    Ok(FixtureBundle {
        id: "sepsis",
        members: vec![Member { mdp, behavior }],
        evaluation,
        start: d0,
        known: known.into_inner(),
        cluster_view: Some(cluster_view),
    })
}

//! Marginal sensitivity bounds and the transition uncertainty sets they induce.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::{EmpiricalModel, HoeffdingWidths, Mode};
use crate::error::{Cell, Error, Result};
use crate::table::StageTable;

/// Lower likelihood-ratio bound `pi + (1 - pi) / Gamma`.
pub fn alpha(pi: f64, gamma: f64) -> f64 {
    pi + (1.0 - pi) / gamma
}

/// Upper likelihood-ratio bound `Gamma + pi (1 - Gamma)`.
pub fn beta(pi: f64, gamma: f64) -> f64 {
    if gamma.is_infinite() {
        return if pi >= 1.0 { 1.0 } else { f64::INFINITY };
    }
    gamma + pi * (1.0 - gamma)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_nan() || gamma < 1.0 {
        return Err(Error::param(alloc::format!("Gamma must be at least 1, got {gamma}")));
    }
    Ok(())
}

/// `alpha` and `beta` for every `(stage, s, a)` of a model.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityBounds {
    pub gamma: f64,
    pub n_states: usize,
    pub n_actions: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl SensitivityBounds {
    pub fn alpha(&self, stage: usize, s: usize, a: usize) -> f64 {
        self.alpha[(stage * self.n_states + s) * self.n_actions + a]
    }
    pub fn beta(&self, stage: usize, s: usize, a: usize) -> f64 {
        self.beta[(stage * self.n_states + s) * self.n_actions + a]
    }
}

pub fn sensitivity_bounds(model: &EmpiricalModel, gamma: f64) -> Result<SensitivityBounds> {
    check_gamma(gamma)?;
    let p = model.pi_b.data();
    Ok(SensitivityBounds {
        gamma,
        n_states: model.n_states,
        n_actions: model.n_actions,
        alpha: p.iter().map(|&x| alpha(x, gamma)).collect(),
        beta: p.iter().map(|&x| beta(x, gamma)).collect(),
    })
}

/// Bounds that stay valid when `pi_b` is only known up to `Delta_pi`: both
/// `alpha` and `beta` are evaluated at `max(pi_hat - Delta_pi, 0)`, which is
/// where `alpha` is smallest and `beta` largest.
pub fn sensitivity_bounds_hoeffding(
    model: &EmpiricalModel,
    gamma: f64,
    widths: &HoeffdingWidths,
) -> Result<SensitivityBounds> {
    check_gamma(gamma)?;
    check_mode(model, widths)?;
    let (ns, na) = (model.n_states, model.n_actions);
    let p = model.pi_b.data();
    let mut al = vec![0.0; p.len()];
    let mut be = vec![0.0; p.len()];
    for (i, &x) in p.iter().enumerate() {
        let s = (i / na) % ns;
        let k = i / (ns * na);
        let lowered = (x - widths.pi(k, s, ns)).max(0.0);
        al[i] = alpha(lowered, gamma);
        be[i] = beta(lowered, gamma);
    }
    Ok(SensitivityBounds {
        gamma,
        n_states: ns,
        n_actions: na,
        alpha: al,
        beta: be,
    })
}

fn check_mode(model: &EmpiricalModel, widths: &HoeffdingWidths) -> Result<()> {
    if model.mode != widths.mode {
        return Err(Error::param("Hoeffding widths and model use different modes"));
    }
    Ok(())
}

/// Box constraints `lo <= P(. | s, a) <= hi` on each transition row, per
/// stage. Rows the data never visited are left unconstrained (`[0, 1]`).
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionUncertainty {
    pub n_states: usize,
    pub n_actions: usize,
    pub mode: Mode,
    pub lo: StageTable,
    pub hi: StageTable,
    pub center: StageTable,
    pub known: Vec<bool>,
}

impl TransitionUncertainty {
    #[inline]
    fn stage(&self, h: usize) -> usize {
        if self.lo.stationary() {
            0
        } else {
            h
        }
    }

    #[inline]
    fn range(&self, s: usize, a: usize) -> core::ops::Range<usize> {
        let (ns, na) = (self.n_states, self.n_actions);
        (s * na + a) * ns..(s * na + a + 1) * ns
    }

    pub fn lo(&self, h: usize, s: usize, a: usize) -> &[f64] {
        &self.lo.stage(self.stage(h))[self.range(s, a)]
    }

    pub fn hi(&self, h: usize, s: usize, a: usize) -> &[f64] {
        &self.hi.stage(self.stage(h))[self.range(s, a)]
    }

    pub fn center(&self, h: usize, s: usize, a: usize) -> &[f64] {
        &self.center.stage(self.stage(h))[self.range(s, a)]
    }

    pub fn known(&self, h: usize, s: usize, a: usize) -> bool {
        self.known[(self.stage(h) * self.n_states + s) * self.n_actions + a]
    }

    pub fn stages(&self) -> usize {
        self.lo.stages()
    }

    /// The set of stationary kernels allowed at every step: the intersection
    /// of the per-step boxes. Steps where a row is unknown impose nothing.
    pub fn stationary_set(&self) -> Result<TransitionUncertainty> {
        if self.stages() == 1 {
            return Ok(self.clone());
        }
        let (ns, na) = (self.n_states, self.n_actions);
        let stride = ns * na * ns;
        let mut lo = vec![0.0f64; stride];
        let mut hi = vec![1.0f64; stride];
        let mut center = vec![0.0; stride];
        let mut known = vec![false; ns * na];
        let mut infeasible = Vec::new();
        for s in 0..ns {
            for a in 0..na {
                let r = self.range(s, a);
                let mut n = 0.0;
                for k in 0..self.stages() {
                    if !self.known[(k * ns + s) * na + a] {
                        continue;
                    }
                    n += 1.0;
                    let l = &self.lo.stage(k)[r.clone()];
                    let u = &self.hi.stage(k)[r.clone()];
                    let c = &self.center.stage(k)[r.clone()];
                    for j in 0..ns {
                        lo[r.start + j] = lo[r.start + j].max(l[j]);
                        hi[r.start + j] = hi[r.start + j].min(u[j]);
                        center[r.start + j] += c[j];
                    }
                }
                if n == 0.0 {
                    center[r.clone()].iter_mut().for_each(|x| *x = 1.0 / ns as f64);
                    continue;
                }
                known[s * na + a] = true;
                center[r.clone()].iter_mut().for_each(|x| *x /= n);
                let sl: f64 = lo[r.clone()].iter().sum();
                let sh: f64 = hi[r.clone()].iter().sum();
                let crossed = (0..ns).any(|j| lo[r.start + j] > hi[r.start + j] + 1e-12);
                if crossed || sl > 1.0 + 1e-12 || sh < 1.0 - 1e-12 {
                    infeasible.push(Cell {
                        step: None,
                        state: s,
                        action: a,
                    });
                }
            }
        }
        if !infeasible.is_empty() {
            return Err(Error::Infeasible { cells: infeasible });
        }
        Ok(TransitionUncertainty {
            n_states: ns,
            n_actions: na,
            mode: Mode::Pooled,
            lo: StageTable::new(1, stride, lo)?,
            hi: StageTable::new(1, stride, hi)?,
            center: StageTable::new(1, stride, center)?,
            known,
        })
    }
}

/// `lo = alpha * P_hat`, `hi = beta * P_hat`; with Hoeffding widths the
/// estimate is first widened to `(P_hat -/+ Delta_P)`.
pub fn build_uncertainty(
    model: &EmpiricalModel,
    bounds: &SensitivityBounds,
    widths: Option<&HoeffdingWidths>,
) -> Result<TransitionUncertainty> {
    let (ns, na) = (model.n_states, model.n_actions);
    if bounds.n_states != ns || bounds.n_actions != na || bounds.alpha.len() != model.pi_b.data().len() {
        return Err(Error::param("sensitivity bounds do not match the model"));
    }
    if let Some(w) = widths {
        check_mode(model, w)?;
    }
    let stages = model.stages();
    let stride = ns * na * ns;
    let mut lo = StageTable::zeros(stages, stride);
    let mut hi = StageTable::zeros(stages, stride);
    let mut infeasible = Vec::new();
    for k in 0..stages {
        let src = model.kernel.stage(k);
        for s in 0..ns {
            for a in 0..na {
                let r = (s * na + a) * ns..(s * na + a + 1) * ns;
                let known = model.kernel_known[(k * ns + s) * na + a];
                if !known {
                    hi.stage_mut(k)[r.clone()].iter_mut().for_each(|x| *x = 1.0);
                    continue;
                }
                let (al, be) = (bounds.alpha(k, s, a), bounds.beta(k, s, a));
                let dp = widths.map_or(0.0, |w| w.p(k, s, a, ns, na));
                let mut sl = 0.0;
                let mut sh = 0.0;
                for j in 0..ns {
                    let p = src[r.start + j];
                    let lj = al * (p - dp).max(0.0);
                    let pu = (p + dp).min(1.0);
                    let hj = if pu <= 0.0 { 0.0 } else { (be * pu).min(1.0) };
                    lo.stage_mut(k)[r.start + j] = lj;
                    hi.stage_mut(k)[r.start + j] = hj;
                    sl += lj;
                    sh += hj;
                }
                if sl > 1.0 + 1e-12 || sh < 1.0 - 1e-12 {
                    infeasible.push(model.cell(k, s, a));
                }
            }
        }
    }
    if !infeasible.is_empty() {
        return Err(Error::Infeasible { cells: infeasible });
    }
    Ok(TransitionUncertainty {
        n_states: ns,
        n_actions: na,
        mode: model.mode,
        lo,
        hi,
        center: model.kernel.clone(),
        known: model.kernel_known.clone(),
    })
}

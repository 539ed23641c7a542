use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::coverage::check_coverage;
use super::{Diagnostics, Method, ValueReport};
use crate::data::EmpiricalModel;
use crate::error::{Error, Result};
use crate::mdp::ObservedPolicy;
use crate::sensitivity::TransitionUncertainty;
use crate::table::dot;

/// Value of a stationary kernel and its gradients with respect to the kernel
/// and to the per-step action probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueGrad {
    pub value: f64,
    /// `V_h(s)`, rows `0..=H`.
    pub v: Vec<f64>,
    /// `dV/dP(s' | s, a)`, laid out `[s][a][s']`.
    pub d_kernel: Vec<f64>,
    /// `dV/dpi_h(a | s)`, laid out `[h][s][a]`.
    pub d_policy: Vec<f64>,
}

/// Backward values, then a forward adjoint pass:
/// `lambda_1 = start`, `lambda_{h+1}(s') = sum_{s,a} lambda_h(s) pi_h(a|s) P(s'|s,a)`.
pub fn mb_value_and_grad(
    kernel: &[f64],
    reward: &[f64],
    pi_e: &ObservedPolicy,
    horizon: usize,
    start: &[f64],
) -> ValueGrad {
    let (ns, na) = (pi_e.n_states(), pi_e.n_actions());
    let mut v = vec![0.0; (horizon + 1) * ns];
    let mut q = vec![0.0; horizon * ns * na];
    for h in (0..horizon).rev() {
        let (cur, next) = v.split_at_mut((h + 1) * ns);
        let next = &next[..ns];
        for s in 0..ns {
            let p = pi_e.probs(h, s);
            let mut vs = 0.0;
            for a in 0..na {
                let row = &kernel[(s * na + a) * ns..(s * na + a + 1) * ns];
                let qa = reward[s * na + a] + dot(row, next);
                q[(h * ns + s) * na + a] = qa;
                vs += p[a] * qa;
            }
            cur[h * ns + s] = vs;
        }
    }
    let mut d_kernel = vec![0.0; ns * na * ns];
    let mut d_policy = vec![0.0; horizon * ns * na];
    let mut lam = start.to_vec();
    let mut next_lam = vec![0.0; ns];
    for h in 0..horizon {
        next_lam.iter_mut().for_each(|x| *x = 0.0);
        let vn = &v[(h + 1) * ns..(h + 2) * ns];
        for s in 0..ns {
            if lam[s] == 0.0 {
                continue;
            }
            let p = pi_e.probs(h, s);
            for a in 0..na {
                d_policy[(h * ns + s) * na + a] = lam[s] * q[(h * ns + s) * na + a];
                let w = lam[s] * p[a];
                if w == 0.0 {
                    continue;
                }
                let base = (s * na + a) * ns;
                for s2 in 0..ns {
                    d_kernel[base + s2] += w * vn[s2];
                    next_lam[s2] += w * kernel[base + s2];
                }
            }
        }
        core::mem::swap(&mut lam, &mut next_lam);
    }
    ValueGrad {
        value: dot(start, &v[..ns]),
        v,
        d_kernel,
        d_policy,
    }
}

/// Euclidean projection of `y` onto `{lo <= x <= hi, sum x = 1}`:
/// `x = clip(y + lambda, lo, hi)` with `lambda` found by bisection.
pub fn project_row(y: &[f64], lo: &[f64], hi: &[f64], out: &mut [f64]) -> Result<()> {
    let sl: f64 = lo.iter().sum();
    let sh: f64 = hi.iter().sum();
    if sl > 1.0 + 1e-12 || sh < 1.0 - 1e-12 || lo.iter().zip(hi).any(|(l, h)| l > h) {
        return Err(Error::Infeasible { cells: Vec::new() });
    }
    let total = |lam: f64| -> f64 {
        y.iter()
            .zip(lo.iter().zip(hi))
            .map(|(&v, (&l, &h))| (v + lam).max(l).min(h))
            .sum()
    };
    let mut a = f64::INFINITY;
    let mut b = f64::NEG_INFINITY;
    for i in 0..y.len() {
        a = a.min(lo[i] - y[i]);
        b = b.max(hi[i] - y[i]);
    }
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if total(mid) < 1.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    // pick the endpoint with the smaller residual
    let lam = if (total(a) - 1.0).abs() <= (total(b) - 1.0).abs() {
        a
    } else {
        b
    };
    for i in 0..y.len() {
        out[i] = (y[i] + lam).max(lo[i]).min(hi[i]);
    }
    Ok(())
}

/// Projects every row of a stationary kernel onto a single-stage set.
pub fn project_onto_uncertainty(p: &[f64], set: &TransitionUncertainty) -> Result<Vec<f64>> {
    if set.stages() != 1 {
        return Err(Error::param("projection needs a stationary uncertainty set"));
    }
    let (ns, na) = (set.n_states, set.n_actions);
    if p.len() != ns * na * ns {
        return Err(Error::Dimension {
            what: "kernel",
            expected: ns * na * ns,
            found: p.len(),
        });
    }
    let mut out = vec![0.0; p.len()];
    for s in 0..ns {
        for a in 0..na {
            let r = (s * na + a) * ns..(s * na + a + 1) * ns;
            project_row(&p[r.clone()], set.lo(0, s, a), set.hi(0, s, a), &mut out[r]).map_err(|_| {
                Error::Infeasible {
                    cells: vec![crate::Cell {
                        step: None,
                        state: s,
                        action: a,
                    }],
                }
            })?;
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PgdConfig {
    pub iterations: usize,
    /// Step size at iteration `t` is `lr0 / sqrt(t)`.
    pub lr0: f64,
}

impl Default for PgdConfig {
    fn default() -> Self {
        PgdConfig {
            iterations: 300,
            lr0: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PgdResult {
    pub best_value: f64,
    pub best_kernel: Vec<f64>,
    pub last_kernel: Vec<f64>,
    /// Value of every iterate, starting with the projected initial point.
    pub trace: Vec<f64>,
}

/// Projected gradient descent on `V_1` over stationary kernels in `set`.
#[allow(clippy::too_many_arguments)]
pub fn pgd_minimize(
    set: &TransitionUncertainty,
    reward: &[f64],
    pi_e: &ObservedPolicy,
    horizon: usize,
    start: &[f64],
    init: &[f64],
    iterations: usize,
    lr0: f64,
) -> Result<PgdResult> {
    let mut p = project_onto_uncertainty(init, set)?;
    let mut vg = mb_value_and_grad(&p, reward, pi_e, horizon, start);
    let mut best_value = vg.value;
    let mut best_kernel = p.clone();
    let mut trace = Vec::with_capacity(iterations + 1);
    trace.push(vg.value);
    let mut y = vec![0.0; p.len()];
    for t in 1..=iterations {
        let eta = lr0 / (t as f64).sqrt();
        for i in 0..p.len() {
            y[i] = p[i] - eta * vg.d_kernel[i];
        }
        p = project_onto_uncertainty(&y, set)?;
        vg = mb_value_and_grad(&p, reward, pi_e, horizon, start);
        trace.push(vg.value);
        if vg.value < best_value {
            best_value = vg.value;
            best_kernel.copy_from_slice(&p);
        }
    }
    Ok(PgdResult {
        best_value,
        best_kernel,
        last_kernel: p,
        trace,
    })
}

fn stationary_coverage(
    model: &EmpiricalModel,
    pi_e: &ObservedPolicy,
    set: &TransitionUncertainty,
    start: &[f64],
) -> Result<Vec<bool>> {
    let (na, hz) = (model.n_actions, model.horizon);
    check_coverage(
        pi_e,
        hz,
        start,
        |_| None,
        |h, s, a| model.reward_known[s * na + a] && (h + 1 == hz || set.known(0, s, a)),
        |_, s, a, s2| set.hi(0, s, a)[s2] > 0.0,
    )
}

/// Model-based worst case over stationary kernels in the (intersected)
/// uncertainty set, by projected gradient descent from the estimate. The
/// result is the lowest value visited, so it can sit above the true minimum.
pub fn mb_pgd(
    model: &EmpiricalModel,
    pi_e: &ObservedPolicy,
    tu: &TransitionUncertainty,
    start: &[f64],
    config: PgdConfig,
) -> Result<(ValueReport, Vec<f64>)> {
    model.check_policy(pi_e.n_states(), pi_e.n_actions())?;
    if start.len() != model.n_states {
        return Err(Error::Dimension {
            what: "start distribution",
            expected: model.n_states,
            found: start.len(),
        });
    }
    let set = tu.stationary_set()?;
    let reliable = stationary_coverage(model, pi_e, &set, start)?;
    let r = pgd_minimize(
        &set,
        &model.reward,
        pi_e,
        model.horizon,
        start,
        set.center.data(),
        config.iterations,
        config.lr0,
    )?;
    let vg = mb_value_and_grad(&r.best_kernel, &model.reward, pi_e, model.horizon, start);
    let report = ValueReport {
        method: Method::MbPgd,
        horizon: model.horizon,
        n_states: model.n_states,
        n_actions: model.n_actions,
        value: r.best_value,
        v: vg.v,
        q: Vec::new(),
        reliable,
        is_lower_bound: true,
        diagnostics: Diagnostics {
            iterations: config.iterations,
            solver_calls: config.iterations + 1,
            trace: r.trace,
            note: Some(String::from("local search; may exceed the stationary minimum")),
            ..Diagnostics::default()
        },
    };
    Ok((report, r.best_kernel))
}

/// Exhaustive grid search over stationary kernels in a small set, followed
/// by coordinate-wise refinement. Only meant as a reference for tiny problems.
pub fn mb_bruteforce_oracle(
    tu: &TransitionUncertainty,
    reward: &[f64],
    pi_e: &ObservedPolicy,
    horizon: usize,
    start: &[f64],
    resolution: f64,
) -> Result<f64> {
    let set = tu.stationary_set()?;
    let (ns, na) = (set.n_states, set.n_actions);
    if !(resolution > 0.0) {
        return Err(Error::param("resolution must be positive"));
    }
    let mut p = set.center.data().to_vec();
    let mut rows: Vec<(usize, Vec<Vec<f64>>)> = Vec::new();
    let mut combos: f64 = 1.0;
    for s in 0..ns {
        for a in 0..na {
            let base = (s * na + a) * ns;
            let used = (0..horizon).any(|h| pi_e.prob(h, s, a) > 0.0);
            let lo = set.lo(0, s, a);
            let hi = set.hi(0, s, a);
            let pts = row_grid(lo, hi, resolution);
            if pts.is_empty() {
                return Err(Error::Infeasible { cells: Vec::new() });
            }
            if !used || pts.len() == 1 {
                p[base..base + ns].copy_from_slice(&pts[0]);
                continue;
            }
            combos *= pts.len() as f64;
            rows.push((base, pts));
        }
    }
    if combos > 5e7 {
        return Err(Error::TooLarge(alloc::format!("{combos:.0} grid points")));
    }
    let eval = |p: &[f64]| mb_value_and_grad(p, reward, pi_e, horizon, start).value;
    let mut idx = vec![0usize; rows.len()];
    let mut best = f64::INFINITY;
    let mut best_idx = idx.clone();
    loop {
        for (k, (base, pts)) in rows.iter().enumerate() {
            p[*base..*base + ns].copy_from_slice(&pts[idx[k]]);
        }
        let v = eval(&p);
        if v < best {
            best = v;
            best_idx.copy_from_slice(&idx);
        }
        let mut k = 0;
        loop {
            if k == rows.len() {
                break;
            }
            idx[k] += 1;
            if idx[k] < rows[k].1.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == rows.len() {
            break;
        }
    }
    for (k, (base, pts)) in rows.iter().enumerate() {
        p[*base..*base + ns].copy_from_slice(&pts[best_idx[k]]);
    }
    // refine each row on a finer local grid while the others stay fixed
    let fine = resolution / 10.0;
    for _ in 0..3 {
        for (base, _) in rows.iter() {
            let cur = p[*base..*base + ns].to_vec();
            let (s, a) = ((base / ns) / na, (base / ns) % na);
            let lo: Vec<f64> = set
                .lo(0, s, a)
                .iter()
                .zip(&cur)
                .map(|(&l, &c)| l.max(c - resolution))
                .collect();
            let hi: Vec<f64> = set
                .hi(0, s, a)
                .iter()
                .zip(&cur)
                .map(|(&h, &c)| h.min(c + resolution))
                .collect();
            let mut keep = cur;
            for cand in row_grid(&lo, &hi, fine) {
                p[*base..*base + ns].copy_from_slice(&cand);
                let v = eval(&p);
                if v < best {
                    best = v;
                    keep = cand;
                }
            }
            p[*base..*base + ns].copy_from_slice(&keep);
        }
    }
    Ok(best)
}

/// Grid points of `{lo <= x <= hi, sum x = 1}`: the first `n - 1`
/// coordinates on a grid (with both ends), the last one determined.
fn row_grid(lo: &[f64], hi: &[f64], step: f64) -> Vec<Vec<f64>> {
    let n = lo.len();
    let mut out = Vec::new();
    let mut cur = vec![0.0; n];
    fn rec(
        i: usize,
        n: usize,
        lo: &[f64],
        hi: &[f64],
        step: f64,
        used: f64,
        cur: &mut Vec<f64>,
        out: &mut Vec<Vec<f64>>,
    ) {
        let rest_lo: f64 = lo[i + 1..].iter().sum();
        let rest_hi: f64 = hi[i + 1..].iter().sum();
        if i == n - 1 {
            let x = 1.0 - used;
            if x >= lo[i] - 1e-12 && x <= hi[i] + 1e-12 {
                cur[i] = x.max(lo[i]).min(hi[i]);
                out.push(cur.clone());
            }
            return;
        }
        let a = lo[i].max(1.0 - used - rest_hi);
        let b = hi[i].min(1.0 - used - rest_lo);
        if a > b + 1e-12 {
            return;
        }
        let b = b.max(a);
        let k = ((b - a) / step).ceil() as usize;
        for j in 0..=k {
            let x = if j == k { b } else { a + j as f64 * step };
            cur[i] = x;
            rec(i + 1, n, lo, hi, step, used + x, cur, out);
        }
    }
    rec(0, n, lo, hi, step, 0.0, &mut cur, &mut out);
    out
}

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use super::{prob, FixtureBundle, Known, Member};
use crate::error::{Error, Result};
use crate::mdp::{
    exact_value, mixing_time_max, ConfoundedMdp, ConfoundedPolicy, ConfounderProcess, InitialDist, Mixing,
    ObservedPolicy, Policy,
};
use crate::table::StageTable;

/// Rewarding state of the two-mixture.
pub const GOOD: usize = 2;
pub const SAFE: usize = 0;
pub const RISKY: usize = 1;

/// Three states (`GOOD` pays 1), a safe action whose next-state law is
/// the same under both confounders and a risky action whose law differs by
/// `delta` in l2 between them. The behavior takes the risky action far more
/// often under confounder 0, where it pays off, so pooled estimates
/// overrate it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureParams {
    /// l2 distance between the two risky rows.
    pub delta: f64,
    /// Prior probability of confounder 0.
    pub p_u0: f64,
    /// Probability of reaching `GOOD` under the safe action.
    pub safe_good: f64,
    /// `pi_b(risky | u)` for `u = 0, 1`.
    pub risky_behavior: [f64; 2],
    pub horizon: usize,
}

impl Default for MixtureParams {
    fn default() -> Self {
        MixtureParams {
            delta: 0.5,
            p_u0: 0.5,
            safe_good: 0.38,
            risky_behavior: [0.9, 0.2],
            horizon: 106,
        }
    }
}

/// `ceil(20 t_mix ln n)`, the horizon regime used with this fixture.
pub fn regime_horizon(t_mix: usize, n: usize) -> usize {
    (20.0 * t_mix.max(1) as f64 * (n.max(2) as f64).ln()).ceil() as usize
}

pub fn two_mixture(params: MixtureParams) -> Result<FixtureBundle> {
    let MixtureParams {
        delta,
        p_u0,
        safe_good,
        risky_behavior,
        horizon,
    } = params;
    prob("p_u0", p_u0)?;
    prob("safe_good", safe_good)?;
    prob("risky_behavior[0]", risky_behavior[0])?;
    prob("risky_behavior[1]", risky_behavior[1])?;
    if horizon == 0 {
        return Err(Error::param("horizon must be positive"));
    }
    // risky rows (0.3, 0.2, 0.5) and (0.3, 0.2 + x, 0.5 - x), |x| sqrt 2 = delta
    let x = delta / 2.0.sqrt();
    if !(0.0..=0.5).contains(&x) {
        return Err(Error::param("delta must lie in [0, 0.5 sqrt 2]"));
    }
    if safe_good > 0.7 {
        return Err(Error::param("safe_good must be at most 0.7"));
    }
    let safe = [0.3, 0.7 - safe_good, safe_good];
    let risky = [[0.3, 0.2, 0.5], [0.3, 0.2 + x, 0.5 - x]];
    let (ns, nu, na) = (3, 2, 2);
    let mut kernel = vec![0.0; ns * nu * na * ns];
    for s in 0..ns {
        for u in 0..nu {
            let base = (s * nu + u) * na * ns;
            kernel[base + SAFE * ns..base + (SAFE + 1) * ns].copy_from_slice(&safe);
            kernel[base + RISKY * ns..base + (RISKY + 1) * ns].copy_from_slice(&risky[u]);
        }
    }
    let mut reward = vec![0.0; ns * na];
    reward[GOOD * na] = 1.0;
    reward[GOOD * na + 1] = 1.0;
    let mdp = ConfoundedMdp::new(
        ns,
        nu,
        na,
        horizon,
        StageTable::new(1, ns * nu * na * ns, kernel)?,
        reward,
        ConfounderProcess::Global(vec![p_u0, 1.0 - p_u0]),
        InitialDist::States(vec![1.0, 0.0, 0.0]),
    )?;
    let pol: Vec<f64> = (0..ns)
        .flat_map(|_| (0..nu).flat_map(|u| [1.0 - risky_behavior[u], risky_behavior[u]]))
        .collect();
    let behavior = Policy::Confounded(ConfoundedPolicy::stationary(ns, nu, na, pol)?);
    let evaluation = ObservedPolicy::deterministic(na, &[RISKY; 3])?;
    let start = vec![1.0, 0.0, 0.0];

    let mut known = Known::new();
    let gap: f64 = (0..ns)
        .map(|k| (mdp.kernel_row(0, 0, 0, RISKY)[k] - mdp.kernel_row(0, 0, 1, RISKY)[k]).powi(2))
        .sum::<f64>()
        .sqrt();
    known.check("delta", delta, gap, 1e-12)?;
    if let Mixing::Steps(t) = mixing_time_max(&mdp, &behavior)? {
        known.check("t_mix", t as f64, t as f64, 0.0)?;
    }
    let total = exact_value(&mdp, &evaluation)?.start;
    let mut mixed = 0.0;
    for (u, w) in [p_u0, 1.0 - p_u0].into_iter().enumerate() {
        let single = ConfoundedMdp::new(
            ns,
            1,
            na,
            horizon,
            mdp.conditional_kernel(u),
            mdp.rewards().to_vec(),
            ConfounderProcess::Global(vec![1.0]),
            InitialDist::States(start.clone()),
        )?;
        let v = exact_value(&single, &evaluation)?.start;
        known.check(if u == 0 { "value_u0" } else { "value_u1" }, v, v, 0.0)?;
        mixed += w * v;
    }
    known.check("value", total, mixed, 1e-10)?;
    Ok(FixtureBundle {
        id: "two-mixture",
        members: vec![Member { mdp, behavior }],
        evaluation,
        start,
        known: known.into_inner(),
        cluster_view: None,
    })
}

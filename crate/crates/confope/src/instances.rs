//! Random tabular instances for sweeps and property checks.

use confope_core::mdp::{
    realized_gamma, ConfoundedMdp, ConfoundedPolicy, ConfounderProcess, InitialDist, ObservedPolicy, Policy,
};
use confope_core::rng::Stream;
use confope_core::table::StageTable;
use confope_core::Result;

/// Random point of the simplex, bounded away from zero by `floor`.
pub fn simplex(rng: &mut Stream, n: usize, floor: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| -(1.0 - rng.uniform()).ln() + floor).collect();
    let z: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= z);
    v
}

pub fn random_observed_policy(rng: &mut Stream, ns: usize, na: usize) -> ObservedPolicy {
    let data: Vec<f64> = (0..ns).flat_map(|_| simplex(rng, na, 0.05)).collect();
    ObservedPolicy::stationary(ns, na, data).expect("valid rows")
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub mdp: ConfoundedMdp,
    pub behavior: Policy,
    pub evaluation: ObservedPolicy,
}

impl Instance {
    pub fn reward_range(&self) -> f64 {
        let r = self.mdp.rewards();
        r.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - r.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Stationary memoryless instance with full-support kernels. The behavior
/// tilts a base policy by the confounder; when `gamma_max` is given the tilt
/// is shrunk until the realized sensitivity parameter is at most that value.
pub fn random_memoryless(
    rng: &mut Stream,
    ns: usize,
    nu: usize,
    na: usize,
    horizon: usize,
    gamma_max: Option<f64>,
) -> Result<Instance> {
    let kernel: Vec<f64> = (0..ns * nu * na).flat_map(|_| simplex(rng, ns, 0.02)).collect();
    let table: Vec<f64> = (0..ns).flat_map(|_| simplex(rng, nu, 0.1)).collect();
    let reward: Vec<f64> = (0..ns * na).map(|_| rng.uniform()).collect();
    let d0 = simplex(rng, ns, 0.1);
    let mdp = ConfoundedMdp::new(
        ns,
        nu,
        na,
        horizon,
        StageTable::new(1, ns * nu * na * ns, kernel)?,
        reward,
        ConfounderProcess::Memoryless(StageTable::new(1, ns * nu, table)?),
        InitialDist::States(d0),
    )?;
    let base: Vec<f64> = (0..ns).flat_map(|_| simplex(rng, na, 0.2)).collect();
    let tilt: Vec<f64> = (0..ns * nu * na).map(|_| 2.0 * rng.uniform() - 1.0).collect();
    let build = |lambda: f64| -> Result<Policy> {
        let mut p = vec![0.0; ns * nu * na];
        for s in 0..ns {
            for u in 0..nu {
                let row = &mut p[(s * nu + u) * na..(s * nu + u + 1) * na];
                for a in 0..na {
                    row[a] = base[s * na + a] * (lambda * tilt[(s * nu + u) * na + a]).exp();
                }
                let z: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= z);
            }
        }
        Ok(Policy::Confounded(ConfoundedPolicy::stationary(ns, nu, na, p)?))
    };
    let mut behavior = build(1.0)?;
    if let Some(g) = gamma_max {
        if realized_gamma(&mdp, &behavior)? > g {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                if realized_gamma(&mdp, &build(mid)?)? > g {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            behavior = build(lo)?;
        }
    }
    let evaluation = random_observed_policy(rng, ns, na);
    Ok(Instance {
        mdp,
        behavior,
        evaluation,
    })
}

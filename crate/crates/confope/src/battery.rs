//! The acceptance battery: fourteen end-to-end checks, each reporting a
//! verdict and a one-line summary of the measured quantities.

use std::time::Instant;

use confope_core::data::{count_stats, hoeffding_widths, EmpiricalModel, Mode, Trajectory};
use confope_core::environments::{
    alternating_pair, gridworld_iid, hypercube_pair, memory_chain, regime_horizon, thm1_pair, two_mixture,
    FixtureBundle, GridworldParams, MixtureParams, REPORT_STATE,
};
use confope_core::global::{
    cluster_separation, clustering_accuracy, clustering_ope, per_cluster_plugin_ope, truth_labels, ClusterAssignment,
    ClusterMethod, SeparationConfig,
};
use confope_core::mdp::{
    exact_value, mixing_time_max, observed_law, trajectory_law, ConfoundedMdp, Mixing, ObservedPolicy, Policy,
    SoftmaxPolicy,
};
use confope_core::ope::{
    cfqe, fqe, mb_bruteforce_oracle, mb_pgd, mb_relaxation, mb_value_and_grad, min_linear_over_box_simplex,
    naive_fqe_lower_bound, project_row, PgdConfig,
};
use confope_core::policy_opt::{
    clustering_pg, maxmin_improve, softmax_grad, suboptimality_check, ClusterPgConfig, MaxMinConfig,
};
use confope_core::rng::Stream;
use confope_core::sensitivity::{build_uncertainty, sensitivity_bounds};
use confope_core::table::one_hot;

use crate::error::{AppError, AppResult};
use crate::instances::{random_memoryless, random_observed_policy, simplex};
use crate::sim::par_map;

#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "{} criterion {:>2} {}: {} ({:.2}s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

pub const NAMES: [&str; 14] = [
    "indistinguishable pair",
    "memory-chain FQE cap",
    "FQE error envelope",
    "lower-bound ordering",
    "Gamma = 1 collapse",
    "knapsack and projection oracles",
    "gradient checks",
    "consistency in n",
    "clustering regime",
    "short-horizon hypercube",
    "alternating sequences",
    "policy improvement",
    "suboptimality bound",
    "Hoeffding coverage",
];

/// Criteria run by `reproduce --figure fixtures`.
pub const FIXTURE_CRITERIA: [usize; 4] = [1, 2, 10, 11];

pub fn run(id: usize) -> Outcome {
    let t = Instant::now();
    let res = match id {
        1 => c1(),
        2 => c2(),
        3 => c3(),
        4 => c4(),
        5 => c5(),
        6 => c6(),
        7 => c7(),
        8 => c8(),
        9 => c9(),
        10 => c10(),
        11 => c11(),
        12 => c12(),
        13 => c13(),
        14 => c14(),
        _ => Err(AppError::config(format!("no criterion {id}"))),
    };
    let (pass, detail) = match res {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    Outcome {
        id,
        name: NAMES.get(id.wrapping_sub(1)).copied().unwrap_or("unknown"),
        pass,
        detail,
        seconds: t.elapsed().as_secs_f64(),
    }
}

type Verdict = AppResult<(bool, String)>;

fn simulate(mdp: &ConfoundedMdp, pi_b: &Policy, n: usize, seed: u64) -> AppResult<Vec<Trajectory>> {
    Ok(confope_core::data::simulate(mdp, pi_b, n, seed)?)
}

fn analytic(mdp: &ConfoundedMdp, pi_b: &Policy, mode: Mode) -> AppResult<EmpiricalModel> {
    Ok(EmpiricalModel::analytic(mdp, pi_b, mode)?)
}

fn from_data(trajs: &[Trajectory], mdp: &ConfoundedMdp) -> AppResult<EmpiricalModel> {
    let cs = count_stats(trajs, mdp.n_states(), mdp.n_actions(), mdp.horizon())?;
    Ok(EmpiricalModel::from_counts(&cs, Mode::Pooled))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn c1() -> Verdict {
    let b = thm1_pair(0.1, 0.0, 0.5, 0.5, 10)?;
    let l1 = observed_law(&b.members[0].mdp, &b.members[0].behavior)?;
    let l2 = observed_law(&b.members[1].mdp, &b.members[1].behavior)?;
    let joint = |l: &confope_core::mdp::ObservedLaw| -> Vec<f64> {
        let (ns, na) = (l.n_states, l.n_actions);
        let mut out = Vec::new();
        for h in 0..l.horizon {
            for s in 0..ns {
                for a in 0..na {
                    let w = l.sa_occ[(h * ns + s) * na + a];
                    for s2 in 0..ns {
                        out.push(w * l.kernel.stage(h)[(s * na + a) * ns + s2]);
                    }
                }
            }
        }
        out
    };
    let (j1, j2) = (joint(&l1), joint(&l2));
    let diff = j1.iter().zip(&j2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let v1 = exact_value(&b.members[0].mdp, &b.evaluation)?.start;
    let v2 = exact_value(&b.members[1].mdp, &b.evaluation)?.start;
    let gap = (v1 - v2).abs();
    Ok((
        diff <= 1e-12 && (gap - 2.0).abs() <= 1e-9,
        format!("max joint diff {diff:.1e}, |V1 - V2| = {gap:.12}"),
    ))
}

fn c2() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for h in [16usize, 64, 256] {
        let b = memory_chain(h)?;
        let model = analytic(b.mdp(), b.behavior(), Mode::PerStep)?;
        let est = fqe(&model, &b.evaluation, &b.start)?.value;
        let truth = exact_value(b.mdp(), &b.evaluation)?.start;
        let cap = 2.0 * (h as f64).log2() + 9.0;
        ok &= est <= cap && (truth - h as f64).abs() <= 1e-9;
        if h == 256 {
            ok &= (truth - est) / h as f64 >= 0.8;
        }
        parts.push(format!("H={h}: FQE {est:.3} (cap {cap:.1}), V {truth:.1}"));
    }
    Ok((ok, parts.join("; ")))
}

/// `[(1 + eH - (1+e)^H) / e, ((1+e)^-H - 1 + eH) / e]`.
fn envelope(eps: f64, h: usize) -> (f64, f64) {
    let hf = h as f64;
    (
        (1.0 + eps * hf - (1.0 + eps).powf(hf)) / eps,
        ((1.0 + eps).powf(-hf) - 1.0 + eps * hf) / eps,
    )
}

fn c3() -> Verdict {
    let mut rng = Stream::new(3, 0);
    let mut inside = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for i in 0..100 {
        let eps = [0.02, 0.05, 0.1][i % 3];
        let (ns, nu, na) = (2 + rng.below(3), 2 + rng.below(3), 2 + rng.below(3));
        let inst = random_memoryless(&mut rng, ns, nu, na, 8, Some(1.0 + eps))?;
        let model = analytic(&inst.mdp, &inst.behavior, Mode::PerStep)?;
        let est = fqe(&model, &inst.evaluation, &inst.mdp.initial_states())?;
        let truth = exact_value(&inst.mdp, &inst.evaluation)?;
        let range = inst.reward_range();
        let (lo, hi) = envelope(eps, 8);
        let mut ok = true;
        for s in 0..ns {
            let err = est.v1()[s] - truth.v1[s];
            ok &= err >= lo * range - 1e-12 && err <= hi * range + 1e-12;
            worst = worst.max((err / range - hi).max(lo - err / range));
        }
        inside += ok as usize;
    }
    Ok((
        inside == 100,
        format!("{inside}/100 instances inside the envelope (largest excess over the envelope {worst:.3e})"),
    ))
}

fn c4() -> Verdict {
    let b = gridworld_iid(GridworldParams::default())?;
    let mdp = b.mdp();
    let model = analytic(mdp, b.behavior(), Mode::Pooled)?;
    let start = one_hot(mdp.n_states(), REPORT_STATE);
    let truth = exact_value(mdp, &b.evaluation)?.v1[REPORT_STATE];
    let realized = b.known("gamma").unwrap_or(f64::INFINITY);
    let range = b.reward_range();
    let hz = mdp.horizon() as f64;
    let base = fqe(&model, &b.evaluation, &start)?;
    let mut ok = true;
    let mut strict = false;
    let mut rows = Vec::new();
    for gamma in [1.0, 2.0, 5.0, 10.0, 20.0, 50.0] {
        let eps = gamma - 1.0;
        let tu = build_uncertainty(&model, &sensitivity_bounds(&model, gamma)?, None)?;
        let naive = naive_fqe_lower_bound(&base, eps, range).value;
        let c = cfqe(&model, &b.evaluation, &tu, &start)?.value;
        let relax = mb_relaxation(&model, &b.evaluation, &tu, &start)?.value;
        let pgd = mb_pgd(&model, &b.evaluation, &tu, &start, PgdConfig::default())?
            .0
            .value;
        ok &= naive <= c + 1e-9;
        ok &= (c - relax).abs() <= 1e-9;
        ok &= c <= pgd + 1e-6;
        if gamma >= realized {
            ok &= pgd <= truth + 1e-6;
            ok &= (truth - c).abs() <= 2.0 * eps * hz * hz * range;
        }
        strict |= pgd > c + 1e-6;
        rows.push(format!("G={gamma}: {naive:.3}/{c:.4}/{pgd:.4}"));
    }
    Ok((
        ok && strict,
        format!(
            "naive/CFQE/mb-pgd at state {REPORT_STATE}, true {truth:.4}: {}",
            rows.join(", ")
        ),
    ))
}

fn c5() -> Verdict {
    let mut rng = Stream::new(5, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let (ns, nu, na) = (2 + rng.below(3), 2 + rng.below(2), 2 + rng.below(2));
        let inst = random_memoryless(&mut rng, ns, nu, na, 6, None)?;
        let model = analytic(&inst.mdp, &inst.behavior, Mode::Pooled)?;
        let start = inst.mdp.initial_states();
        let tu = build_uncertainty(&model, &sensitivity_bounds(&model, 1.0)?, None)?;
        let f = fqe(&model, &inst.evaluation, &start)?.value;
        let vals = [
            cfqe(&model, &inst.evaluation, &tu, &start)?.value,
            mb_relaxation(&model, &inst.evaluation, &tu, &start)?.value,
            mb_pgd(&model, &inst.evaluation, &tu, &start, PgdConfig::default())?
                .0
                .value,
        ];
        for v in vals {
            worst = worst.max((v - f).abs());
        }
    }
    Ok((
        worst <= 1e-8,
        format!("max deviation from FQE {worst:.2e} over 20 instances"),
    ))
}

/// Vertex enumeration: every basic solution has all but one coordinate at
/// a bound.
fn lp_vertex_oracle(c: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    let n = c.len();
    let mut best = f64::INFINITY;
    for free in 0..n {
        for mask in 0..(1usize << (n - 1)) {
            let mut x = vec![0.0; n];
            let mut k = 0;
            let mut sum = 0.0;
            for i in 0..n {
                if i == free {
                    continue;
                }
                x[i] = if mask & (1 << k) != 0 { hi[i] } else { lo[i] };
                sum += x[i];
                k += 1;
            }
            x[free] = 1.0 - sum;
            if x[free] < lo[free] - 1e-12 || x[free] > hi[free] + 1e-12 {
                continue;
            }
            best = best.min(c.iter().zip(&x).map(|(a, b)| a * b).sum());
        }
    }
    best
}

fn random_box(rng: &mut Stream, n: usize) -> (Vec<f64>, Vec<f64>) {
    loop {
        let lo: Vec<f64> = (0..n).map(|_| rng.uniform() * 0.8 / n as f64).collect();
        let hi: Vec<f64> = lo.iter().map(|l| (l + rng.uniform() * 0.9).min(1.0)).collect();
        if lo.iter().sum::<f64>() <= 1.0 && hi.iter().sum::<f64>() >= 1.0 {
            return (lo, hi);
        }
    }
}

fn grid_projection(y: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let dist = |x: &[f64; 3]| x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let mut best = ([0.0; 3], f64::INFINITY);
    let search = |c0: f64, c1: f64, half: f64, step: f64, best: &mut ([f64; 3], f64)| {
        let steps = (2.0 * half / step).round() as i64;
        for i in 0..=steps {
            let x0 = c0 - half + i as f64 * step;
            if x0 < lo[0] || x0 > hi[0] {
                continue;
            }
            for j in 0..=steps {
                let x1 = c1 - half + j as f64 * step;
                if x1 < lo[1] || x1 > hi[1] {
                    continue;
                }
                let x2 = 1.0 - x0 - x1;
                if x2 < lo[2] - 1e-12 || x2 > hi[2] + 1e-12 {
                    continue;
                }
                let x = [x0, x1, x2];
                let d = dist(&x);
                if d < best.1 {
                    *best = (x, d);
                }
            }
        }
    };
    search(0.5, 0.5, 0.5, 0.002, &mut best);
    let c = best.0;
    search(c[0], c[1], 0.004, 0.0001, &mut best);
    best.0.to_vec()
}

fn c6() -> Verdict {
    let mut rng = Stream::new(6, 0);
    let mut knap_worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = 2 + rng.below(5);
        let (lo, hi) = random_box(&mut rng, n);
        let c: Vec<f64> = (0..n).map(|_| 2.0 * rng.uniform() - 1.0).collect();
        let (v, _) = min_linear_over_box_simplex(&c, &lo, &hi)?;
        knap_worst = knap_worst.max((v - lp_vertex_oracle(&c, &lo, &hi)).abs());
    }
    let mut proj_worst: f64 = 0.0;
    for _ in 0..200 {
        let (lo, hi) = random_box(&mut rng, 3);
        let y: Vec<f64> = (0..3).map(|_| 2.0 * rng.uniform() - 0.5).collect();
        let mut out = vec![0.0; 3];
        project_row(&y, &lo, &hi, &mut out)?;
        let g = grid_projection(&y, &lo, &hi);
        proj_worst = proj_worst.max(out.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    let mut pgd_worst: f64 = 0.0;
    for _ in 0..20 {
        let inst = random_memoryless(&mut rng, 2, 2, 2, 4, None)?;
        let model = analytic(&inst.mdp, &inst.behavior, Mode::Pooled)?;
        let tu = build_uncertainty(&model, &sensitivity_bounds(&model, 2.0)?, None)?;
        let start = inst.mdp.initial_states();
        let cfg = PgdConfig {
            iterations: 2000,
            ..PgdConfig::default()
        };
        let pgd = mb_pgd(&model, &inst.evaluation, &tu, &start, cfg)?.0.value;
        let brute = mb_bruteforce_oracle(&tu, &model.reward, &inst.evaluation, 4, &start, 0.02)?;
        pgd_worst = pgd_worst.max((pgd - brute).abs());
    }
    Ok((
        knap_worst <= 1e-9 && proj_worst <= 2e-3 && pgd_worst <= 1e-3,
        format!("knapsack {knap_worst:.1e}, projection {proj_worst:.1e}, PGD vs brute force {pgd_worst:.1e}"),
    ))
}

fn rel_err(g: &[f64], fd: &[f64]) -> f64 {
    let scale = fd.iter().chain(g).fold(0.0f64, |m, x| m.max(x.abs())).max(1e-12);
    g.iter().zip(fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
}

fn c7() -> Verdict {
    let mut rng = Stream::new(7, 0);
    let mut worst_p: f64 = 0.0;
    let mut worst_t: f64 = 0.0;
    let step = 1e-6;
    for _ in 0..50 {
        let (ns, na, hz) = (2 + rng.below(3), 2 + rng.below(2), 2 + rng.below(5));
        let kernel: Vec<f64> = (0..ns * na).flat_map(|_| simplex(&mut rng, ns, 0.0)).collect();
        let reward: Vec<f64> = (0..ns * na).map(|_| rng.uniform()).collect();
        let start = simplex(&mut rng, ns, 0.0);
        let pi = random_observed_policy(&mut rng, ns, na);
        let g = mb_value_and_grad(&kernel, &reward, &pi, hz, &start);
        let mut fd = vec![0.0; kernel.len()];
        for i in 0..kernel.len() {
            let mut k = kernel.clone();
            k[i] += step;
            let up = mb_value_and_grad(&k, &reward, &pi, hz, &start).value;
            k[i] -= 2.0 * step;
            let down = mb_value_and_grad(&k, &reward, &pi, hz, &start).value;
            fd[i] = (up - down) / (2.0 * step);
        }
        worst_p = worst_p.max(rel_err(&g.d_kernel, &fd));

        let logits: Vec<f64> = (0..ns * na).map(|_| 4.0 * rng.uniform() - 2.0).collect();
        let value_at = |th: &[f64]| -> AppResult<f64> {
            let p = SoftmaxPolicy::new(ns, na, th.to_vec())?;
            Ok(mb_value_and_grad(&kernel, &reward, p.policy(), hz, &start).value)
        };
        let p = SoftmaxPolicy::new(ns, na, logits.clone())?;
        let vg = mb_value_and_grad(&kernel, &reward, p.policy(), hz, &start);
        let mut per_state = vec![0.0; ns * na];
        for row in vg.d_policy.chunks(ns * na) {
            for (o, x) in per_state.iter_mut().zip(row) {
                *o += x;
            }
        }
        let g_theta = softmax_grad(&logits, na, &per_state)?;
        let mut fd = vec![0.0; logits.len()];
        for i in 0..logits.len() {
            let mut th = logits.clone();
            th[i] += step;
            let up = value_at(&th)?;
            th[i] -= 2.0 * step;
            let down = value_at(&th)?;
            fd[i] = (up - down) / (2.0 * step);
        }
        worst_t = worst_t.max(rel_err(&g_theta, &fd));
    }
    Ok((
        worst_p <= 1e-5 && worst_t <= 1e-5,
        format!("max relative error dV/dP {worst_p:.1e}, dV/dtheta {worst_t:.1e}"),
    ))
}

fn consistency_errors(
    mdp: &ConfoundedMdp,
    behavior: &Policy,
    evaluation: &ObservedPolicy,
    start: &[f64],
    gamma: f64,
) -> AppResult<Vec<f64>> {
    let model = analytic(mdp, behavior, Mode::Pooled)?;
    let tu = build_uncertainty(&model, &sensitivity_bounds(&model, gamma)?, None)?;
    let target = mb_pgd(&model, evaluation, &tu, start, PgdConfig::default())?.0.value;
    let mut med = Vec::new();
    for n in [100usize, 1000, 10000] {
        let errs = par_map(10, |seed| -> AppResult<f64> {
            let t = simulate(mdp, behavior, n, seed as u64)?;
            let m = from_data(&t, mdp)?;
            let tu = build_uncertainty(&m, &sensitivity_bounds(&m, gamma)?, None)?;
            let v = mb_pgd(&m, evaluation, &tu, start, PgdConfig::default())?.0.value;
            Ok((v - target).abs())
        })?
        .into_iter()
        .collect::<AppResult<Vec<f64>>>()?;
        med.push(median(errs));
    }
    Ok(med)
}

fn c8() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    let g = gridworld_iid(GridworldParams::default())?;
    let start = one_hot(g.mdp().n_states(), REPORT_STATE);
    let mut cases: Vec<(String, ConfoundedMdp, Policy, ObservedPolicy, Vec<f64>, f64)> = vec![(
        "gridworld".into(),
        g.mdp().clone(),
        g.behavior().clone(),
        g.evaluation.clone(),
        start,
        g.reward_range(),
    )];
    let mut rng = Stream::new(8, 0);
    let inst = random_memoryless(&mut rng, 3, 2, 2, 5, None)?;
    let range = inst.reward_range();
    cases.push((
        "random".into(),
        inst.mdp.clone(),
        inst.behavior.clone(),
        inst.evaluation.clone(),
        inst.mdp.initial_states(),
        range,
    ));
    for (name, mdp, b, e, s0, range) in cases {
        let med = consistency_errors(&mdp, &b, &e, &s0, 2.0)?;
        let bound = 0.05 * range * mdp.horizon() as f64;
        ok &= med[0] >= med[1] && med[1] >= med[2] && med[2] <= bound;
        parts.push(format!(
            "{name}: {:.4} / {:.4} / {:.4} (bound {bound:.3})",
            med[0], med[1], med[2]
        ));
    }
    Ok((ok, format!("median |error| at n = 1e2/1e3/1e4: {}", parts.join("; "))))
}

fn mixture_bundle() -> AppResult<(FixtureBundle, usize)> {
    let b = two_mixture(MixtureParams::default())?;
    let t_mix = match mixing_time_max(b.mdp(), b.behavior())? {
        Mixing::Steps(t) => t,
        Mixing::Failed(f) => return Err(AppError::config(format!("two-mixture does not mix: {f:?}"))),
    };
    let h = regime_horizon(t_mix, 200);
    let b = two_mixture(MixtureParams {
        horizon: h,
        ..MixtureParams::default()
    })?;
    Ok((b, t_mix))
}

fn c9() -> Verdict {
    let (b, t_mix) = mixture_bundle()?;
    let mdp = b.mdp();
    let (ns, na, hz) = (mdp.n_states(), mdp.n_actions(), mdp.horizon());
    let cfg = SeparationConfig::default();
    let exact = par_map(30, |seed| -> AppResult<bool> {
        let t = simulate(mdp, b.behavior(), 200, seed as u64)?;
        let ca = cluster_separation(&t, ns, na, 2, &cfg)?;
        Ok(clustering_accuracy(&ca, &truth_labels(&t)?)? == 0.0)
    })?
    .into_iter()
    .collect::<AppResult<Vec<bool>>>()?
    .iter()
    .filter(|&&x| x)
    .count();
    let truth = exact_value(mdp, &b.evaluation)?.start;
    let runs = par_map(30, |seed| -> AppResult<(f64, f64)> {
        let t = simulate(mdp, b.behavior(), 2000, 1000 + seed as u64)?;
        let (r, _) = clustering_ope(
            &t,
            |t| cluster_separation(t, ns, na, 2, &cfg),
            |c| per_cluster_plugin_ope(c, ns, na, hz, &b.evaluation, &b.start),
        )?;
        let f = fqe(&from_data(&t, mdp)?, &b.evaluation, &b.start)?.value;
        Ok(((r.value - truth).abs() / truth.abs(), (f - truth).abs() / truth.abs()))
    })?
    .into_iter()
    .collect::<AppResult<Vec<(f64, f64)>>>()?;
    let ope_ok = runs.iter().filter(|r| r.0 <= 0.05).count();
    let fqe_bad = runs.iter().filter(|r| r.1 > 0.2).count();
    Ok((
        exact * 100 >= 95 * 30 && ope_ok * 100 >= 90 * 30 && fqe_bad == 30,
        format!(
            "t_mix {t_mix}, H {hz}: exact recovery {exact}/30, clustering OPE within 5% {ope_ok}/30, FQE off by >20% {fqe_bad}/30 (median FQE error {:.0}%)",
            100.0 * median(runs.iter().map(|r| r.1).collect())
        ),
    ))
}

fn c10() -> Verdict {
    let p = [[0.99, 0.98], [0.01, 0.02]];
    let hz = 2;
    let b = hypercube_pair(8, p, hz)?;
    let l1 = trajectory_law(&b.members[0].mdp, &b.members[0].behavior)?;
    let l2 = trajectory_law(&b.members[1].mdp, &b.members[1].behavior)?;
    let mut law_diff: f64 = 0.0;
    let same_support = l1.len() == l2.len() && l1.keys().zip(l2.keys()).all(|(a, b)| a == b);
    for (k, v) in &l1 {
        let w = l2.get(k).copied().unwrap_or(0.0);
        law_diff = law_diff.max((v.ln() - w.ln()).abs());
    }
    let (ns, na) = (b.mdp().n_states(), b.mdp().n_actions());
    let errors = par_map(30, |seed| -> AppResult<f64> {
        let t = simulate(b.mdp(), b.behavior(), 200, seed as u64)?;
        let ca = cluster_separation(&t, ns, na, 2, &SeparationConfig::default())?;
        Ok(clustering_accuracy(&ca, &truth_labels(&t)?)?)
    })?
    .into_iter()
    .collect::<AppResult<Vec<f64>>>()?;
    let mean_err = errors.iter().sum::<f64>() / errors.len() as f64;
    let corner = b
        .start
        .iter()
        .position(|&x| x == 1.0)
        .ok_or_else(|| AppError::config("hypercube start is not a corner"))?;
    let v1 = exact_value(&b.members[0].mdp, &b.evaluation)?.v1[corner];
    let v2 = exact_value(&b.members[1].mdp, &b.evaluation)?.v1[corner];
    let formula = (hz as f64 - 1.0) * ((p[0][0] + p[0][1]) - (p[1][0] + p[1][1])).abs() / 2.0;
    let gap_diff = ((v1 - v2).abs() - formula).abs();
    Ok((
        same_support && law_diff <= 1e-12 && mean_err >= 0.4 && gap_diff <= 1e-12,
        format!(
            "{} trajectories, max |log-lik diff| {law_diff:.1e}, mean clustering error {mean_err:.3}, gap {:.6} vs {formula:.6}",
            l1.len(),
            (v1 - v2).abs()
        ),
    ))
}

fn c11() -> Verdict {
    let hz = 10;
    let b = alternating_pair(hz)?;
    let l1 = trajectory_law(&b.members[0].mdp, &b.members[0].behavior)?;
    let l2 = trajectory_law(&b.members[1].mdp, &b.members[1].behavior)?;
    let same = l1.len() == l2.len()
        && l1
            .iter()
            .zip(&l2)
            .all(|((k1, v1), (k2, v2))| k1 == k2 && (v1 - v2).abs() <= 1e-12);
    let v1 = exact_value(&b.members[0].mdp, &b.evaluation)?.start;
    let stated = (1.0 - 2.0 / 2f64.powi(hz as i32)) * (hz as f64 - 1.0);
    let t = simulate(b.mdp(), b.behavior(), 1000, 11)?;
    let est = fqe(&from_data(&t, b.mdp())?, &b.evaluation, &b.start)?.value;
    let value_ok = (v1 - stated).abs() <= 1e-9;
    Ok((
        same && value_ok && est.abs() <= 1e-9,
        format!(
            "observed laws identical: {same}; V(M1) by DP {v1:.6} vs stated {stated:.6}; pooled FQE {est:.1e} (error {:.3})",
            (v1 - est).abs()
        ),
    ))
}

fn c12() -> Verdict {
    let g = gridworld_iid(GridworldParams::default())?;
    let (ns, na) = (g.mdp().n_states(), g.mdp().n_actions());
    let start = one_hot(ns, REPORT_STATE);
    let logits: Vec<f64> = (0..ns * na)
        .map(|i| {
            if g.evaluation.prob(0, i / na, i % na) > 0.5 {
                2.0
            } else {
                0.0
            }
        })
        .collect();
    let theta0 = SoftmaxPolicy::new(ns, na, logits)?;
    let improved = par_map(30, |seed| -> AppResult<bool> {
        let t = simulate(g.mdp(), g.behavior(), 1000, seed as u64)?;
        let m = from_data(&t, g.mdp())?;
        let tu = build_uncertainty(&m, &sensitivity_bounds(&m, 10.0)?, None)?;
        let initial = mb_pgd(&m, theta0.policy(), &tu, &start, PgdConfig::default())?.0.value;
        let (_, tr) = maxmin_improve(&m, &tu, &theta0, &MaxMinConfig::default(), &start)?;
        Ok(tr.final_objective > initial)
    })?
    .into_iter()
    .collect::<AppResult<Vec<bool>>>()?
    .iter()
    .filter(|&&x| x)
    .count();

    let (b, _) = mixture_bundle()?;
    let mdp = b.mdp();
    let (ns, na, hz) = (mdp.n_states(), mdp.n_actions(), mdp.horizon());
    let truth = |pi: &ObservedPolicy| Ok(exact_value(mdp, pi)?.start);
    let theta0 = SoftmaxPolicy::new(ns, na, vec![0.0; ns * na])?;
    let cfg = ClusterPgConfig::default();
    let runs = par_map(30, |seed| -> AppResult<(f64, f64, f64)> {
        let t = simulate(mdp, b.behavior(), 200, seed as u64)?;
        let ca = cluster_separation(&t, ns, na, 2, &SeparationConfig::default())?;
        let one = ClusterAssignment::from_labels(vec![0; t.len()], 1, ClusterMethod::Given)?;
        let (_, tc) = clustering_pg(&t, &ca, ns, na, hz, &theta0, &cfg, &b.start, Some(&truth))?;
        let (_, tb) = clustering_pg(&t, &one, ns, na, hz, &theta0, &cfg, &b.start, Some(&truth))?;
        Ok((tc.objective[0], tc.final_objective, tb.final_objective))
    })?
    .into_iter()
    .collect::<AppResult<Vec<(f64, f64, f64)>>>()?;
    let up = runs.iter().filter(|r| r.1 > r.0).count();
    let mean_c = runs.iter().map(|r| r.1).sum::<f64>() / 30.0;
    let mean_b = runs.iter().map(|r| r.2).sum::<f64>() / 30.0;
    Ok((
        improved >= 28 && up >= 27 && mean_c > mean_b,
        format!(
            "max-min improved {improved}/30; clustered PG improved {up}/30, mean final {mean_c:.3} vs single-cluster {mean_b:.3}"
        ),
    ))
}

fn c13() -> Verdict {
    let mut rng = Stream::new(13, 0);
    let mut holds = 0;
    let mut worst_ratio: f64 = 0.0;
    for i in 0..100 {
        let inst = random_memoryless(&mut rng, 3, 2, 2, 5, None)?;
        let candidates: Vec<ObservedPolicy> = (0..20).map(|_| random_observed_policy(&mut rng, 3, 2)).collect();
        let t = simulate(&inst.mdp, &inst.behavior, 30, i)?;
        let m = from_data(&t, &inst.mdp)?;
        let start = inst.mdp.initial_states();
        let r = suboptimality_check(
            &candidates,
            |p| Ok(exact_value(&inst.mdp, p)?.start),
            |p| Ok(mb_value_and_grad(m.kernel.data(), &m.reward, p, m.horizon, &start).value),
        )?;
        holds += r.holds as usize;
        if r.max_error > 0.0 {
            worst_ratio = worst_ratio.max(r.gap / (2.0 * r.max_error));
        }
    }
    Ok((
        holds == 100,
        format!("{holds}/100 instances satisfy 0 <= gap <= 2 max error (largest gap / bound {worst_ratio:.3})"),
    ))
}

fn coverage_rate(mdp: &ConfoundedMdp, behavior: &Policy, n: usize, resamples: usize) -> AppResult<f64> {
    let truth = analytic(mdp, behavior, Mode::Pooled)?;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let covered = par_map(resamples, |r| -> AppResult<bool> {
        let t = simulate(mdp, behavior, n, 14_000 + r as u64)?;
        let cs = count_stats(&t, ns, na, mdp.horizon())?;
        let m = EmpiricalModel::from_counts(&cs, Mode::Pooled);
        let w = hoeffding_widths(&cs, Mode::Pooled, 0.05, 0.05)?;
        for s in 0..ns {
            if !m.state_known(0, s) {
                continue;
            }
            for a in 0..na {
                if (m.pi_b(0, s)[a] - truth.pi_b(0, s)[a]).abs() > w.pi(0, s, ns) {
                    return Ok(false);
                }
                if !m.kernel_known(0, s, a) {
                    continue;
                }
                let dp = w.p(0, s, a, ns, na);
                for s2 in 0..ns {
                    if (m.kernel_row(0, s, a)[s2] - truth.kernel_row(0, s, a)[s2]).abs() > dp {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    })?
    .into_iter()
    .collect::<AppResult<Vec<bool>>>()?;
    Ok(covered.iter().filter(|&&c| c).count() as f64 / resamples as f64)
}

fn c14() -> Verdict {
    let g = gridworld_iid(GridworldParams::default())?;
    let a = coverage_rate(g.mdp(), g.behavior(), 200, 500)?;
    let mut rng = Stream::new(14, 0);
    let inst = random_memoryless(&mut rng, 3, 2, 2, 10, None)?;
    let b = coverage_rate(&inst.mdp, &inst.behavior, 200, 500)?;
    Ok((
        a >= 0.9 && b >= 0.9,
        format!("coverage over 500 resamples: gridworld {a:.3}, random instance {b:.3} (target 0.90)"),
    ))
}

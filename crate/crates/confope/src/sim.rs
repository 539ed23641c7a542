//! Parallel simulation and the worker pool.

use rayon::prelude::*;

use confope_core::data::{simulate_one, Dataset, Trajectory};
use confope_core::mdp::{ConfoundedMdp, Policy};

use crate::error::{AppError, AppResult};

/// Worker count: `CONFOPE_THREADS` if set to a positive integer, otherwise
/// the available parallelism.
pub fn worker_count() -> usize {
    std::env::var("CONFOPE_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn pool() -> AppResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| AppError::config(format!("thread pool: {e}")))
}

/// Runs `f` over `0..n` on the pool, results in index order.
pub fn par_map<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync + Send) -> AppResult<Vec<T>> {
    Ok(pool()?.install(|| (0..n).into_par_iter().map(f).collect()))
}

/// Same trajectories as the sequential simulator, generated in parallel.
pub fn simulate(mdp: &ConfoundedMdp, pi_b: &Policy, n: usize, seed: u64) -> AppResult<Vec<Trajectory>> {
    pi_b.check_dims(mdp.n_states(), mdp.n_confounders(), mdp.n_actions(), mdp.horizon())?;
    par_map(n, |i| simulate_one(mdp, pi_b, seed, i as u64))
}

pub fn simulate_dataset(env_id: &str, mdp: &ConfoundedMdp, pi_b: &Policy, n: usize, seed: u64) -> AppResult<Dataset> {
    Ok(Dataset {
        env_id: env_id.into(),
        seed,
        horizon: mdp.horizon(),
        trajectories: simulate(mdp, pi_b, n, seed)?,
    })
}

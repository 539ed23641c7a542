//! Fixtures addressable by string id.

use confope_core::environments::{
    alternating_pair, gridworld_iid, hypercube_pair, memory_chain, sepsis_toy, thm1_pair, two_mixture, FixtureBundle,
    GridworldParams, MixtureParams, SepsisParams,
};

use crate::error::{AppError, AppResult};

pub const ENV_IDS: [&str; 7] = [
    "thm1",
    "memory-chain",
    "alternating",
    "hypercube",
    "gridworld",
    "sepsis",
    "two-mixture",
];

pub const HYPERCUBE_P: [[f64; 2]; 2] = [[0.99, 0.98], [0.01, 0.02]];

/// Builds a fixture with its default parameters, optionally at another
/// horizon.
pub fn fixture(id: &str, horizon: Option<usize>) -> AppResult<FixtureBundle> {
    if horizon == Some(0) {
        return Err(AppError::config("horizon must be positive"));
    }
    let b = match id {
        "thm1" => thm1_pair(0.1, 0.0, 0.5, 0.5, horizon.unwrap_or(10))?,
        "memory-chain" => memory_chain(horizon.unwrap_or(16))?,
        "alternating" => alternating_pair(horizon.unwrap_or(10))?,
        "hypercube" => hypercube_pair(8, HYPERCUBE_P, horizon.unwrap_or(2))?,
        "gridworld" => {
            let d = GridworldParams::default();
            gridworld_iid(GridworldParams {
                horizon: horizon.unwrap_or(d.horizon),
                ..d
            })?
        }
        "sepsis" => {
            let d = SepsisParams::default();
            sepsis_toy(SepsisParams {
                horizon: horizon.unwrap_or(d.horizon),
                ..d
            })?
        }
        "two-mixture" => {
            let d = MixtureParams::default();
            two_mixture(MixtureParams {
                horizon: horizon.unwrap_or(d.horizon),
                ..d
            })?
        }
        other => {
            return Err(AppError::config(format!(
                "unknown environment '{other}' (expected one of {})",
                ENV_IDS.join(", ")
            )))
        }
    };
    Ok(b)
}

/// The fixture whose MDP has exactly `mdp_horizon` steps. Only `thm1`
/// differs from `fixture`: its MDP has one step more than its parameter.
pub fn fixture_for_data(id: &str, mdp_horizon: usize) -> AppResult<FixtureBundle> {
    let param = if id == "thm1" {
        mdp_horizon.saturating_sub(1)
    } else {
        mdp_horizon
    };
    let b = fixture(id, Some(param))?;
    if b.mdp().horizon() != mdp_horizon {
        return Err(AppError::config(format!(
            "environment '{id}' cannot have horizon {mdp_horizon}"
        )));
    }
    Ok(b)
}

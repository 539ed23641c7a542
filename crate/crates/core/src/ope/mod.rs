//! Off-policy evaluation under memoryless confounding: FQE, confounded FQE
//! (a per-step worst case) and the model-based worst case over stationary
//! kernels.

mod coverage;
mod fqe;
mod knapsack;
mod model_based;
mod theory;

pub use fqe::{cfqe, fqe, mb_relaxation, naive_fqe_lower_bound};
pub use knapsack::min_linear_over_box_simplex;
pub use model_based::{
    mb_bruteforce_oracle, mb_pgd, mb_value_and_grad, pgd_minimize, project_onto_uncertainty, project_row, PgdConfig,
    PgdResult, ValueGrad,
};
pub use theory::{naive_correction, theory_envelopes, Envelopes};

use alloc::string::String;
use alloc::vec::Vec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Fqe,
    NaiveFqe,
    Cfqe,
    MbRelax,
    MbPgd,
    Plugin,
    Clustering,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Fqe => "fqe",
            Method::NaiveFqe => "naive-fqe",
            Method::Cfqe => "cfqe",
            Method::MbRelax => "mb-relax",
            Method::MbPgd => "mb-pgd",
            Method::Plugin => "plugin",
            Method::Clustering => "clustering",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub iterations: usize,
    pub solver_calls: usize,
    /// Objective per iteration for iterative methods.
    pub trace: Vec<f64>,
    pub note: Option<String>,
    /// `(weight, value)` of each component of a mixture estimate.
    pub components: Vec<(f64, f64)>,
}

/// Estimated values. `v` holds `V_h(s)` for rows `0..=H` and `q` the
/// matching `Q_h(s, a)` for rows `0..H` where the method produces them.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueReport {
    pub method: Method,
    pub horizon: usize,
    pub n_states: usize,
    pub n_actions: usize,
    /// Value at the requested start distribution.
    pub value: f64,
    pub v: Vec<f64>,
    pub q: Vec<f64>,
    /// States whose `V_1` only depends on visited cells.
    pub reliable: Vec<bool>,
    pub is_lower_bound: bool,
    pub diagnostics: Diagnostics,
}

impl ValueReport {
    pub fn v1(&self) -> &[f64] {
        &self.v[..self.n_states]
    }

    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[(h * self.n_states + s) * self.n_actions + a]
    }
}

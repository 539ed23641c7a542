/// Worst-case error envelopes for a sensitivity level `Gamma = 1 + eps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Envelopes {
    /// FQE error `V - V_hat` lies in `[fqe_lo, fqe_hi]`.
    pub fqe_lo: f64,
    pub fqe_hi: f64,
    /// Upper bound on `V - V_cfqe`.
    pub cfqe_cap: f64,
    /// Upper bound on `V - V_mb`.
    pub mb_cap: f64,
}

/// `(1 + eps H - (1 + eps)^H) / eps`, the factor the naive lower bound adds.
pub fn naive_correction(eps: f64, horizon: usize) -> f64 {
    let h = horizon as f64;
    if eps == 0.0 {
        return 0.0;
    }
    (1.0 + eps * h - (1.0 + eps).powf(h)) / eps
}

pub fn theory_envelopes(eps: f64, horizon: usize, reward_range: f64) -> Envelopes {
    let h = horizon as f64;
    let hi = if eps == 0.0 {
        0.0
    } else {
        ((1.0 + eps).powf(-h) - 1.0 + eps * h) / eps
    };
    let cap = 2.0 * eps * h * h * reward_range;
    Envelopes {
        fqe_lo: naive_correction(eps, horizon) * reward_range,
        fqe_hi: hi * reward_range,
        cfqe_cap: cap,
        mb_cap: cap,
    }
}

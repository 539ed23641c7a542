use alloc::vec;

use super::{prob, FixtureBundle, Known, Member};
use crate::error::{Error, Result};
use crate::mdp::{exact_value, ConfoundedMdp, ConfounderProcess, InitialDist, ObservedPolicy, Policy};
use crate::table::StageTable;

/// Lazy walk on `{0,1}^n` plus a rewarding twin `s_r` of the all-ones
/// corner, with a global binary confounder. `p[i][j]` is the share of
/// traffic the corner sends to `s_r` in MDP `i` under confounder `j`.
///
/// States `0..2^n` are bit masks (bit set = coordinate is one); state `2^n`
/// is `s_r`. Starting from all zeros, no trajectory of length `H <= n/4`
/// reaches a state where the MDPs or confounders differ.
pub fn hypercube_pair(n: usize, p: [[f64; 2]; 2], horizon: usize) -> Result<FixtureBundle> {
    if n < 2 || n > 16 {
        return Err(Error::param("hypercube dimension must lie in 2..=16"));
    }
    if horizon == 0 {
        return Err(Error::param("horizon must be positive"));
    }
    for row in &p {
        for &x in row {
            prob("p", x)?;
        }
    }
    let corner = (1usize << n) - 1;
    let sr = 1usize << n;
    let ns = sr + 1;
    let (nu, na) = (2, 2);
    let nf = n as f64;
    let build = |i: usize| -> Result<ConfoundedMdp> {
        let mut kernel = vec![0.0; ns * nu * na * ns];
        for s in 0..ns {
            for u in 0..nu {
                let pij = p[i][u];
                let up = ((s * nu + u) * na) * ns;
                let down = ((s * nu + u) * na + 1) * ns;
                // action 0: set a zero bit
                if s == sr {
                    kernel[up + corner] = 1.0 - pij;
                    kernel[up + sr] += pij;
                } else if s == corner {
                    kernel[up + sr] = pij;
                    kernel[up + corner] += 1.0 - pij;
                } else {
                    let zeros = n - s.count_ones() as usize;
                    if zeros == 1 {
                        kernel[up + sr] += pij / nf;
                        kernel[up + corner] += (1.0 - pij) / nf;
                        kernel[up + s] += 1.0 - 1.0 / nf;
                    } else {
                        for b in 0..n {
                            if s & (1 << b) == 0 {
                                kernel[up + (s | (1 << b))] += 1.0 / nf;
                            }
                        }
                        kernel[up + s] += (n - zeros) as f64 / nf;
                    }
                }
                // action 1: clear a one bit
                let bits = if s == sr { corner } else { s };
                let zeros = n - bits.count_ones() as usize;
                for b in 0..n {
                    if bits & (1 << b) != 0 {
                        kernel[down + (bits & !(1 << b))] += 1.0 / nf;
                    }
                }
                kernel[down + s] += zeros as f64 / nf;
            }
        }
        let mut reward = vec![0.0; ns * na];
        reward[sr * na] = 1.0;
        reward[sr * na + 1] = 1.0;
        let mut d0 = vec![0.0; ns];
        d0[0] = 1.0;
        ConfoundedMdp::new(
            ns,
            nu,
            na,
            horizon,
            StageTable::new(1, ns * nu * na * ns, kernel)?,
            reward,
            ConfounderProcess::Global(vec![0.5, 0.5]),
            InitialDist::States(d0),
        )
    };
    let behavior = Policy::Observed(ObservedPolicy::uniform(ns, na));
    let members = vec![
        Member {
            mdp: build(0)?,
            behavior: behavior.clone(),
        },
        Member {
            mdp: build(1)?,
            behavior,
        },
    ];
    let evaluation = ObservedPolicy::stationary(ns, na, (0..ns).flat_map(|_| [1.0, 0.0]).collect())?;

    let mut known = Known::new();
    let h = horizon as f64;
    let from_corner = |m: &ConfoundedMdp| -> Result<f64> { Ok(exact_value(m, &evaluation)?.v1[corner]) };
    let v0 = from_corner(&members[0].mdp)?;
    let v1 = from_corner(&members[1].mdp)?;
    known.check("value_corner_m1", (p[0][0] + p[0][1]) / 2.0 * (h - 1.0), v0, 1e-10)?;
    known.check("value_corner_m2", (p[1][0] + p[1][1]) / 2.0 * (h - 1.0), v1, 1e-10)?;
    known.check(
        "value_gap",
        (h - 1.0) * ((p[0][0] + p[0][1]) - (p[1][0] + p[1][1])).abs() / 2.0,
        (v0 - v1).abs(),
        1e-10,
    )?;
    if 4 * horizon <= n {
        // every state a short trajectory can use as a source has identical
        // rows in all four (MDP, confounder) combinations
        let mut reach = vec![false; ns];
        reach[0] = true;
        let mut max_diff: f64 = 0.0;
        for _ in 0..horizon.saturating_sub(1) {
            let mut next = reach.clone();
            for s in (0..ns).filter(|&s| reach[s]) {
                for a in 0..na {
                    let base = members[0].mdp.kernel_row(0, s, 0, a);
                    for m in &members {
                        for u in 0..nu {
                            let row = m.mdp.kernel_row(0, s, u, a);
                            for s2 in 0..ns {
                                max_diff = max_diff.max((row[s2] - base[s2]).abs());
                                if row[s2] > 0.0 {
                                    next[s2] = true;
                                }
                            }
                        }
                    }
                }
            }
            reach = next;
        }
        known.check_at_most("reachable_row_max_diff", 0.0, max_diff)?;
    }
    let mut start = vec![0.0; ns];
    start[corner] = 1.0;
    Ok(FixtureBundle {
        id: "hypercube",
        members,
        evaluation,
        start,
        known: known.into_inner(),
        cluster_view: None,
    })
}

/// Index of the all-ones corner and of `s_r` for dimension `n`.
pub fn hypercube_corners(n: usize) -> (usize, usize) {
    ((1 << n) - 1, 1 << n)
}

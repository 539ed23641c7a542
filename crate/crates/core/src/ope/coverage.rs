use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Cell, Error, Result};
use crate::mdp::ObservedPolicy;

/// Marks which first-step states have values that depend only on known
/// cells, and fails if a start state with positive mass is not one of them.
///
/// `known(h, s, a)` says whether the cell has data; `succ(h, s, a, s2)` says
/// whether `s2` can follow `(s, a)` at step `h`.
pub(crate) fn check_coverage(
    pi_e: &ObservedPolicy,
    horizon: usize,
    start: &[f64],
    step_of: impl Fn(usize) -> Option<usize>,
    known: impl Fn(usize, usize, usize) -> bool,
    succ: impl Fn(usize, usize, usize, usize) -> bool,
) -> Result<Vec<bool>> {
    let (ns, na) = (pi_e.n_states(), pi_e.n_actions());
    let mut ok = vec![true; (horizon + 1) * ns];
    for h in (0..horizon).rev() {
        for s in 0..ns {
            let p = pi_e.probs(h, s);
            let good = (0..na).filter(|&a| p[a] > 0.0).all(|a| {
                known(h, s, a) && (h + 1 == horizon || (0..ns).all(|s2| !succ(h, s, a, s2) || ok[(h + 1) * ns + s2]))
            });
            ok[h * ns + s] = good;
        }
    }
    let bad_start: Vec<usize> = (0..ns).filter(|&s| start[s] > 0.0 && !ok[s]).collect();
    if bad_start.is_empty() {
        return Ok(ok[..ns].to_vec());
    }
    // collect the unknown cells reachable from the failing starts
    let mut cells = Vec::new();
    let mut frontier = vec![false; ns];
    for &s in &bad_start {
        frontier[s] = true;
    }
    for h in 0..horizon {
        let mut next = vec![false; ns];
        for s in 0..ns {
            if !frontier[s] || ok[h * ns + s] {
                continue;
            }
            for a in 0..na {
                if pi_e.prob(h, s, a) <= 0.0 {
                    continue;
                }
                if !known(h, s, a) {
                    let c = Cell {
                        step: step_of(h),
                        state: s,
                        action: a,
                    };
                    if !cells.contains(&c) {
                        cells.push(c);
                    }
                } else if h + 1 < horizon {
                    for s2 in 0..ns {
                        if succ(h, s, a, s2) {
                            next[s2] = true;
                        }
                    }
                }
            }
        }
        frontier = next;
    }
    Err(Error::Unvisited { cells })
}

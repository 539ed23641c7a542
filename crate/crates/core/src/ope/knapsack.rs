use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Minimises `c . m` subject to `lo <= m <= hi` and `sum m = 1` by filling
/// the cheapest coordinates first (ties broken by index).
pub fn min_linear_over_box_simplex(c: &[f64], lo: &[f64], hi: &[f64]) -> Result<(f64, Vec<f64>)> {
    let n = c.len();
    if lo.len() != n || hi.len() != n {
        return Err(Error::param("cost and bound vectors differ in length"));
    }
    let mut order = Vec::with_capacity(n);
    let mut m = alloc::vec![0.0; n];
    let v = fill(c, lo, hi, &mut order, &mut m).ok_or_else(|| Error::Infeasible { cells: Vec::new() })?;
    Ok((v, m))
}

/// Allocation-free core; `None` if the box does not meet the simplex.
pub(crate) fn fill(c: &[f64], lo: &[f64], hi: &[f64], order: &mut Vec<usize>, m: &mut [f64]) -> Option<f64> {
    let n = c.len();
    let mut budget = 1.0;
    for i in 0..n {
        if lo[i] > hi[i] + 1e-12 {
            return None;
        }
        m[i] = lo[i];
        budget -= lo[i];
    }
    if budget < -1e-9 {
        return None;
    }
    order.clear();
    order.extend(0..n);
    order.sort_by(|&i, &j| c[i].total_cmp(&c[j]).then(i.cmp(&j)));
    for &i in order.iter() {
        if budget <= 0.0 {
            break;
        }
        let add = (hi[i] - lo[i]).max(0.0).min(budget);
        m[i] += add;
        budget -= add;
    }
    if budget > 1e-9 {
        return None;
    }
    Some(
        c.iter()
            .zip(m.iter())
            .filter(|(_, &w)| w != 0.0)
            .map(|(x, w)| x * w)
            .sum(),
    )
}

//! Flat storage for tables that are either stationary or indexed by step.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A table with `stages` slabs of `stride` values each. A single stage means
/// the table is shared by every step.
#[derive(Clone, Debug, PartialEq)]
pub struct StageTable {
    stages: usize,
    stride: usize,
    data: Vec<f64>,
}

impl StageTable {
    pub fn new(stages: usize, stride: usize, data: Vec<f64>) -> Result<Self> {
        if stages == 0 {
            return Err(Error::param("a stage table needs at least one stage"));
        }
        if data.len() != stages * stride {
            return Err(Error::Dimension {
                what: "stage table",
                expected: stages * stride,
                found: data.len(),
            });
        }
        Ok(StageTable { stages, stride, data })
    }

    pub fn zeros(stages: usize, stride: usize) -> Self {
        StageTable {
            stages,
            stride,
            data: vec![0.0; stages * stride],
        }
    }

    pub fn stationary(&self) -> bool {
        self.stages == 1
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    #[inline]
    pub fn stage_index(&self, h: usize) -> usize {
        if self.stages == 1 {
            0
        } else {
            h
        }
    }

    #[inline]
    pub fn stage(&self, h: usize) -> &[f64] {
        let k = self.stage_index(h);
        &self.data[k * self.stride..(k + 1) * self.stride]
    }

    #[inline]
    pub fn stage_mut(&mut self, h: usize) -> &mut [f64] {
        let k = self.stage_index(h);
        &mut self.data[k * self.stride..(k + 1) * self.stride]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

/// Checks that consecutive chunks of `width` entries are distributions.
pub(crate) fn check_rows(what: &'static str, data: &[f64], width: usize) -> Result<()> {
    if width == 0 {
        return Err(Error::param("distribution over an empty set"));
    }
    for (i, row) in data.chunks(width).enumerate() {
        let mut sum = 0.0;
        for &p in row {
            if !p.is_finite() || p < -1e-12 {
                return Err(Error::NotDistribution {
                    what,
                    detail: alloc::format!("row {i} has entry {p}"),
                });
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NotDistribution {
                what,
                detail: alloc::format!("row {i} sums to {sum}"),
            });
        }
    }
    Ok(())
}

pub fn one_hot(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

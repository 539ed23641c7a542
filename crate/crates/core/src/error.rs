use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// A `(step, state, action)` coordinate. `step` is `None` for pooled tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cell {
    pub step: Option<usize>,
    pub state: usize,
    pub action: usize,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(h) => write!(f, "(h={}, s={}, a={})", h + 1, self.state, self.action),
            None => write!(f, "(s={}, a={})", self.state, self.action),
        }
    }
}

struct CellList<'a>(&'a [Cell]);

impl fmt::Display for CellList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().take(8).enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        if self.0.len() > 8 {
            write!(f, " and {} more", self.0.len() - 8)?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{what}: expected length {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{what} is not a probability distribution ({detail})")]
    NotDistribution { what: &'static str, detail: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("operation requires a {required} confounder process")]
    UnsupportedProcess { required: &'static str },
    #[error("uncertainty set is empty at {}", CellList(.cells))]
    Infeasible { cells: Vec<Cell> },
    #[error("evaluation policy needs unvisited cells {}", CellList(.cells))]
    Unvisited { cells: Vec<Cell> },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("known quantity `{name}` = {stated} but the construction gives {computed}")]
    KnownMismatch { name: String, stated: f64, computed: f64 },
    #[error("instance too large: {0}")]
    TooLarge(String),
}

impl Error {
    pub fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T> = core::result::Result<T, Error>;

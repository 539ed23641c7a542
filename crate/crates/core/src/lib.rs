//! Off-policy evaluation and policy improvement for tabular MDPs with
//! unobserved confounders.
//!
//! The crate is `no_std` and only needs `alloc`. Everything that touches the
//! file system, threads or the command line lives in the `confope` crate.

#![no_std]

extern crate alloc;

pub mod data;
pub mod environments;
pub mod error;
pub mod global;
pub mod mdp;
pub mod ope;
pub mod policy_opt;
pub mod rng;
pub mod sensitivity;
pub mod table;

pub use error::{Cell, Error, Result};

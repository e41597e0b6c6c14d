//! Dimension estimates for infinite iterated function systems on [0, 1]
//! whose contraction ratios decay polynomially, under digit restrictions
//! of the form a_{n+1} > Φ(a_n).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod dimension;
pub mod families;
pub mod ifs_core;
pub mod measures;
pub mod numerics;
pub mod report;
pub mod restrictions;

pub use error::{Error, Result};

//! Spectral laboratory for random Beltrami equations and iterated singular
//! integrals on periodic grids.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod ops;
pub mod fields;
pub mod beltrami;
pub mod stats;
pub mod config;
pub mod experiments;
pub mod output;
pub mod render;
pub mod runner;

pub use error::{Error, Result};
pub use grid::{C64, CellMap, Direction, Field, Grid, Space};

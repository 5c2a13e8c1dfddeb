//! Command implementations behind the `carmo` binary.
//!
//! Everything is exposed as a library so the commands can be driven
//! in-process by the acceptance suite; `main` only parses arguments and
//! maps errors to exit codes. The offline/online split is structural:
//! `propagate`, `bound`, and `region` only ever load artifacts written
//! by `build`, they never construct expected blocks themselves.

// `!(a > b)` rejects NaN flag values where `a <= b` would accept them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
mod csvout;

use std::path::PathBuf;

use carmo_core::errbound::{BoundMethod, SubsetStrategy};
use carmo_core::model::Mode;
use carmo_core::safety::RegionShape;
use carmo_core::Error;

/// Parsed configuration shared by the commands; every field is validated
/// before execution.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub spec_path: PathBuf,
    pub mode: Mode,
    pub n_t: u32,
    pub horizon: u32,
    pub j0: Vec<u32>,
    pub bound: BoundMethod,
    pub strategy: SubsetStrategy,
    pub subset_sizes: Vec<usize>,
    pub prob_bound: f64,
    pub alpha: f64,
    pub dims: Option<Vec<usize>>,
    pub shape: RegionShape,
    pub seed: u64,
    pub samples: usize,
    pub out_dir: PathBuf,
    pub mem_budget: u64,
    pub dump_trajectories: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            spec_path: PathBuf::new(),
            mode: Mode::Reduced,
            n_t: 4,
            horizon: 2,
            j0: vec![1, 2],
            bound: BoundMethod::SubsetK,
            strategy: SubsetStrategy::LargestStackedCoordinate,
            subset_sizes: vec![usize::MAX],
            prob_bound: 0.1,
            alpha: 1.0,
            dims: None,
            shape: RegionShape::Ellipsoid,
            seed: 0,
            samples: 10_000,
            out_dir: PathBuf::from("out"),
            mem_budget: 1 << 30,
            dump_trajectories: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.prob_bound > 0.0 && self.prob_bound < 1.0) {
            return Err(Error::invalid("probability bound must lie in (0,1)"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::invalid("alpha must be positive"));
        }
        if self.n_t < 1 {
            return Err(Error::invalid("truncation degree must be at least 1"));
        }
        if self.j0.is_empty() || self.j0.iter().any(|&j| j == 0 || j > self.n_t) {
            return Err(Error::invalid(
                "moment degrees must be between 1 and the truncation degree",
            ));
        }
        Ok(())
    }
}

/// Process exit code for an error, per the documented contract:
/// 2 configuration, 3 resource budget, 4 numeric.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::ResourceBudget { .. } => 3,
        Error::Numeric(_) => 4,
        _ => 2,
    }
}

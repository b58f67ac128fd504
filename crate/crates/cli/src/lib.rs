//! Command-line driver: configuration, subcommands, CSV artifacts.
//!
//! Exit status: 0 on success, 1 when a computation fails, 2 on configuration
//! errors, 3 when a comparison (or the demo suite) does not pass.

// Config checks are written as `!(x > 0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod demo;

use std::fmt;
use std::path::PathBuf;

use markov_pide::Error;

pub use config::RunConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Config(String),
    Compute(String),
    Check(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Compute(_) => 1,
            Failure::Config(_) => 2,
            Failure::Check(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Compute(m) => write!(f, "computation failed: {m}"),
            Failure::Check(m) => write!(f, "check failed: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownModel(_)
            | Error::MissingParameter { .. }
            | Error::UnknownParameter { .. }
            | Error::InvalidParameter { .. }
            | Error::IntensityExceedsBound { .. }
            | Error::InvalidMarkMeasure(_)
            | Error::DimensionMismatch { .. }
            | Error::XiOutsideDomain { .. }
            | Error::InvalidArgument(_)
            | Error::ProbeOffGrid { .. } => Failure::Config(e.to_string()),
            _ => Failure::Compute(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Compute(format!("writing output: {e}"))
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output = o.clone();
        }
    }
}

/// Sizes the global rayon pool from `MARKOV_PIDE_THREADS` (unset or 0 = all cores).
pub fn init_threads() -> Result<(), Failure> {
    let n = match std::env::var("MARKOV_PIDE_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Failure::Config(format!("MARKOV_PIDE_THREADS must be a non-negative integer, got `{v}`")))?,
        Err(_) => 0,
    };
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Compute(e.to_string()))?;
    }
    Ok(())
}

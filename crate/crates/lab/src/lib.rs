//! Config-driven experiment runner for `lil-lab-core`: JSON configs in,
//! RFC-4180 CSV plus a JSON summary out, and the invariant suites behind
//! `lil-lab verify`.

// `!(x > 0.0)` rejects NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod output;
pub mod run;
pub mod suites;

use std::path::Path;

pub use config::{ExperimentConfig, SchemaError};
pub use output::{Report, Written};

/// Environment fallback for the worker count.
pub const THREADS_ENV: &str = "LIL_LAB_THREADS";

/// Worker count: flag, then config, then `LIL_LAB_THREADS`, then the
/// machine's parallelism.
pub fn resolve_threads(flag: Option<usize>, config: Option<usize>) -> Result<usize, SchemaError> {
    if let Some(t) = flag.or(config) {
        return Ok(t);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(t),
            _ => Err(SchemaError {
                field: THREADS_ENV.into(),
                message: format!("expected a positive integer, got `{v}`"),
                location: None,
            }),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs `cfg` on a private pool of `threads` workers and writes its files.
pub fn execute(cfg: &ExperimentConfig, threads: usize, out_dir: &Path) -> anyhow::Result<(Report, Written)> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    let report = pool.install(|| run::run_experiment(cfg))?;
    let written = output::write_report(out_dir, &report, cfg.seed(), threads)?;
    Ok((report, written))
}

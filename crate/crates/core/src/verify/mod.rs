//! Monte Carlo verification harness.
//!
//! Each suite first checks its oracle against itself (calibration), then
//! compares simulated quantities with the oracle and collects the outcomes in
//! a [`VerificationReport`]. Replications run on the rayon pool, each with its
//! own [`RngStream`]; results are gathered in replication order, so reports do
//! not depend on scheduling.

mod config;
mod limits;
mod model;
mod report;
mod samplers;

use rayon::prelude::*;

pub use config::{ExperimentConfig, Suite, Tolerances};
pub use limits::run_rsm_experiment;
pub use model::{run_occupancy_experiment, run_poissonization_experiment, run_regime_experiment};
pub use report::{config_hash, EcdfCurve, Rule, TestRecord, Timing, VerificationReport, VERSION};
pub use samplers::{run_sibuya_experiment, run_stable_experiment};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Stream tags separating the random sources of one run.
pub(crate) mod tag {
    pub const MODEL: u64 = 1;
    pub const ORACLE: u64 = 2;
    pub const CALIBRATION: u64 = 3;
    pub const POISSON: u64 = 4;
    pub const ENVIRONMENT: u64 = 5;
    pub const EXTRA: u64 = 6;
}

/// Runs `f(rep, rng)` for every replication in parallel, results in order.
pub(crate) fn par_reps<T, F>(seed: u64, tag: u64, reps: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut RngStream) -> Result<T> + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|r| f(r, &mut RngStream::substream(seed, tag, r as u64)))
        .collect()
}

/// `total` draws of `f`, split into fixed chunks that each own a stream.
pub(crate) fn par_draws<T, F>(seed: u64, tag: u64, total: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut RngStream) -> T + Sync,
{
    const CHUNK: usize = 10_000;
    let chunks = total.div_ceil(CHUNK);
    let parts: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = RngStream::substream(seed, tag, c as u64);
            let len = CHUNK.min(total - c * CHUNK);
            (0..len).map(|_| f(&mut rng)).collect()
        })
        .collect();
    parts.into_iter().flatten().collect()
}

pub(crate) fn check_suite(cfg: &ExperimentConfig, want: Suite) -> Result<ExperimentConfig> {
    if cfg.suite != want {
        return Err(Error::Config(format!("config is for suite {:?}, not {want:?}", cfg.suite)));
    }
    cfg.resolved()
}

/// Dispatches on `cfg.suite`. `threads` caps the worker pool; `None` uses
/// rayon's default.
pub fn run_suite(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<VerificationReport> {
    let resolved = cfg.resolved()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder.build().map_err(|e| Error::Internal(e.to_string()))?;
    let mut report = pool.install(|| match resolved.suite {
        Suite::Sibuya => run_sibuya_experiment(&resolved),
        Suite::Stable => run_stable_experiment(&resolved),
        Suite::Occupancy => run_occupancy_experiment(&resolved),
        Suite::Rsm => run_rsm_experiment(&resolved),
        Suite::Regime => run_regime_experiment(&resolved),
        Suite::Poissonization => run_poissonization_experiment(&resolved),
    })?;
    report.timing.threads = pool.current_num_threads();
    Ok(report)
}

pub(crate) fn fmt_param(x: f64) -> String {
    format!("{x}")
}

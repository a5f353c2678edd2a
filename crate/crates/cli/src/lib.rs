//! Batch driver for the affordance/Kano pipeline.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 a fit did not
//! converge (reports are still written).

pub mod commands;
pub mod config;

pub use commands::{cmd_analyze, cmd_compare, cmd_extract, cmd_simulate, Outcome};
pub use config::PipelineConfig;

use kanodrift::par::Exec;

pub const EXIT_INPUT: i32 = 2;

/// Size the global thread pool. One thread also selects the sequential
/// code paths, which is the bit-reproducible mode.
pub fn init_threads(threads: Option<usize>) -> anyhow::Result<Exec> {
    match threads {
        Some(0) => anyhow::bail!("--threads must be at least 1"),
        Some(1) => Ok(Exec::Sequential),
        #[cfg(feature = "parallel")]
        Some(n) => {
            // a second call in the same process keeps the first pool
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::debug!("thread pool already initialized: {e}");
            }
            Ok(Exec::Parallel)
        }
        _ => Ok(Exec::Parallel),
    }
}

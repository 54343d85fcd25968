//! Convergence-study harness for `hdglab-core`: configuration, refinement
//! sweeps, CSV tables, SVG plots, mesh dumps and the self-test suite.

pub mod config;
pub mod meshio;
pub mod output;
pub mod selftest;
pub mod study;

pub use config::{ConfigError, ProblemKind, StudyConfig};
pub use study::{run_study, DegreeStudy, StudyOutcome};

/// Size the global rayon pool from `HDGLAB_THREADS`, if set. Must run before
/// the first parallel loop.
pub fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("HDGLAB_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| anyhow::anyhow!("HDGLAB_THREADS must be a positive integer"))?;
        if n == 0 {
            anyhow::bail!("HDGLAB_THREADS must be a positive integer");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

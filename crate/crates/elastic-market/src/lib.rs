//! Scenario files, reports and the experiment runner behind the
//! `elastic-market` command line.

pub mod cli;
pub mod commands;
pub mod error;
pub mod random;
pub mod report;
pub mod scenario;

pub use cli::{run, Cli};
pub use error::CliError;
pub use scenario::{parse_scenario, parse_scenario_str, Scenario};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "ELASTIC_MARKET_THREADS";

/// Worker count from `ELASTIC_MARKET_THREADS`, when set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
}

/// A pool honoring [`thread_cap`].
pub fn pool() -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    builder.build().expect("thread pool")
}

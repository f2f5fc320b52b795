//! Reproducible numerical experiments on top of `hlab-core`: each experiment
//! reads a JSON config, runs its trials, and produces a CSV table, a JSON
//! summary with fitted constants and pass/fail checks, and optional SVG plots.

pub mod config;
pub mod error;
pub mod experiments;
pub mod report;
pub mod svg;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use experiments::{find, Experiment, REGISTRY};
pub use report::{Check, ExperimentReport, Relation};

/// Runs the experiment named in `config`; `seed` overrides the config seed.
pub fn run(config: &ExperimentConfig, seed: Option<u64>) -> Result<ExperimentReport> {
    config.validate()?;
    let experiment = find(&config.experiment)?;
    let ctx = experiments::Context {
        config,
        seed: seed.unwrap_or(config.seed),
        hash: config.hash(),
    };
    experiment.run(&ctx)
}

/// The shipped configuration of an experiment.
pub fn default_config(name: &str) -> Result<ExperimentConfig> {
    find(name)?.default_config()
}

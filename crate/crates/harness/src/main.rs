use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hlab::{default_config, ExperimentConfig, HarnessError, REGISTRY};

#[derive(Parser)]
#[command(
    name = "hlab",
    version,
    about = "Numerical experiments on the Heisenberg group"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        experiment: String,
        /// JSON config; the shipped default is used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides the config `out` field.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write SVG plots.
        #[arg(long)]
        plot: bool,
    },
    /// List the registered experiments.
    List,
    /// Print the shipped default config of an experiment.
    Config { experiment: String },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<u8, HarnessError> {
    match command {
        Command::List => {
            for e in REGISTRY {
                let criteria = if e.criteria.is_empty() {
                    "-".to_string()
                } else {
                    e.criteria.join(",")
                };
                println!("{:<20} {:<8} {}", e.name, criteria, e.summary);
            }
            Ok(0)
        }
        Command::Config { experiment } => {
            print!("{}", hlab::find(&experiment)?.default_config);
            Ok(0)
        }
        Command::Run {
            experiment,
            config,
            seed,
            out,
            plot,
        } => {
            let cfg = match config {
                Some(path) => ExperimentConfig::load(&path)?,
                None => default_config(&experiment)?,
            };
            if cfg.experiment != experiment {
                return Err(HarnessError::config(format!(
                    "config is for `{}`, not `{experiment}`",
                    cfg.experiment
                )));
            }
            let dir = out
                .or_else(|| cfg.out.clone())
                .unwrap_or_else(|| PathBuf::from("out"));
            let report = hlab::run(&cfg, seed)?;
            for c in &report.checks {
                println!("{c}");
            }
            for c in &report.constants {
                println!("constant {} = {:e} +- {:e}", c.name, c.value, c.uncertainty);
            }
            for n in &report.notes {
                println!("note: {n}");
            }
            for path in report.write_outputs(&dir, plot)? {
                println!("wrote {}", path.display());
            }
            let pass = report.passed();
            println!(
                "{}: {}",
                report.experiment,
                if pass {
                    "all checks passed"
                } else {
                    "some checks failed"
                }
            );
            Ok(if pass { 0 } else { 1 })
        }
    }
}
